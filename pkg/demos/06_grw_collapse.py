"""Spontaneous localization: hits, branch statistics, and the master equation.

A cat state of two packets is hit by random Gaussian multiplications whose
centers follow the locally averaged density, so a single hit selects a
branch with the Born weights.  The same coherence loss shows up
deterministically in the density-matrix picture, where the localization
term damps rho(x, x') by exp(-lam (x-x')^2 t).
"""

import math

import numpy as np

from decolab import dynamics as dy
from decolab import rng as drng

# -- one run -------------------------------------------------------------------
n, dx = 512, 0.06
x_min = -0.5 * n * dx
x = x_min + dx * np.arange(n)
w1, w2, d, width = 0.3, 0.7, 6.0, 0.6
vals = (math.sqrt(w1) * np.exp(-((x + d) ** 2) / (4 * width ** 2))
        + math.sqrt(w2) * np.exp(-((x - d) ** 2) / (4 * width ** 2)))
psi0 = dy.normalize(x_min, dx, vals)

params = dy.GRWParams(nu=8.0, delta=0.8, n_particles=1)
run = dy.grw_run(psi0, params, t_end=1.0, rng=drng.stream(4))
print(f"{len(run.events)} hits in one unit of time "
      f"(rate {float(params.hit_rate()):.1f}); first events:")
for e in run.events[:3]:
    print(f"  t = {e.time:.3f}, center = {e.center:+.2f}")
left = float(np.sum(run.final.density()[run.final.x < 0]) * dx)
print(f"final weight on the left branch: {left:.4f} (collapsed)")

# -- branch statistics over many single hits -----------------------------------
centers = dy.sample_hit_centers(psi0, params, drng.stream(5), 10_000)
f_left = float(np.mean(centers < 0))
print(f"\n10^4 single hits: left-branch frequency {f_left:.4f} vs weight {w1}")

# -- the published macroscopic numbers, kept exact ------------------------------
preset = dy.PAPER_MACROSCOPIC
print(f"\nmacroscopic preset: rate N*nu = {float(preset.hit_rate()):.1e} / s, "
      f"mean inter-hit time exactly {preset.mean_interhit_time()} s")
desk, factor = dy.desk_rescaled(preset, target_rate=50.0)
print(f"desk rescaling: simulate at rate {float(desk.hit_rate()):.0f}, "
      f"rescale factor {factor:.2e}")

# -- density-matrix picture ------------------------------------------------------
rho = np.outer(psi0.values, psi0.values.conj())
lam, dt = 0.02, 2e-3
patch0 = dy.offdiagonal_patch_norm(rho, x, d, -d, 1.2)
for _ in range(200):
    rho = dy.master_step(rho, x, 400.0, lam, dt)
patch1 = dy.offdiagonal_patch_norm(rho, x, d, -d, 1.2)
rate = -math.log(patch1 / patch0) / (200 * dt)
print(f"\nmaster equation: cross-peak decay rate {rate:.3f} vs "
      f"lam * separation^2 = {lam * (2 * d) ** 2:.3f}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import os

    os.makedirs("demos/out", exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.plot(x, psi0.density(), label="before")
    ax.plot(x, run.final.density(), label=f"after {len(run.events)} hits")
    ax.set(xlabel="x", ylabel="|psi|^2", title="spontaneous localization")
    ax.legend()
    fig.tight_layout()
    fig.savefig("demos/out/grw_collapse.png", dpi=120)
    print("wrote demos/out/grw_collapse.png")
except ImportError:
    pass
