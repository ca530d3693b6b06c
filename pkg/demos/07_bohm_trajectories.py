"""Pilot-wave trajectories: equivariance and the no-crossing rule.

Particle positions ride the probability current of the wavefunction.  Two
structural facts carry the whole demonstration: an ensemble started from
|psi(0)|^2 stays distributed as |psi(t)|^2 for all time, and in one
dimension trajectories never cross (the velocity field is single valued),
which for a symmetric double slit means no particle ever switches sides.
"""

import numpy as np
from scipy import stats

from decolab import dynamics as dy

# -- free spreading Gaussian: equivariance -------------------------------------
psi0 = dy.gaussian_packet(-20.48, 0.08, 512, center=0.0, width=1.0)
ens = dy.quantum_equilibrium_ensemble(psi0, 4000, seed=3)
out = dy.bohm_run(lambda t: dy.free_evolve(psi0, t), ens, 0.0, 2.0, 0.01)

psi_t = dy.free_evolve(psi0, 2.0)
dens = psi_t.density() * psi_t.dx
cdf = np.concatenate([[0.0], np.cumsum(dens)])
cdf /= cdf[-1]
edges = np.interp(np.linspace(0, 1, 21),
                  cdf, np.concatenate([[psi_t.x[0] - psi_t.dx], psi_t.x]))
observed, _ = np.histogram(out.final_positions(), bins=edges)
chi2, p_val = stats.chisquare(observed, np.full(20, len(out.final_positions()) / 20))
print(f"equivariance: chi^2 p-value {p_val:.3f} for 4000 trajectories "
      f"against |psi(t=2)|^2")

order = np.argsort(out.paths[0])
crossings = sum(int(np.any(np.diff(row[order]) < -1e-9)) for row in out.paths)
print(f"snapshots with an ordering violation: {crossings} (no crossings)")

# -- double slit: the symmetry axis is a barrier --------------------------------
n, dx = 512, 0.05
x_min = -0.5 * n * dx
x = x_min + dx * np.arange(n)
vals = (np.exp(-((x + 3.0) ** 2) / (4 * 0.6 ** 2))
        + np.exp(-((x - 3.0) ** 2) / (4 * 0.6 ** 2)))
slit = dy.normalize(x_min, dx, vals)
ens2 = dy.quantum_equilibrium_ensemble(slit, 600, seed=8)
out2 = dy.bohm_run(lambda t: dy.free_evolve(slit, t), ens2, 0.0, 1.5, 0.005)
switched = int(np.sum(np.sign(out2.paths[0]) != np.sign(out2.paths[-1])))
print(f"double slit: {switched} of 600 trajectories crossed the symmetry axis")

v = dy.bohm_velocity(dy.gaussian_packet(-12.8, 0.05, 512, 0.0, 1.5,
                                        momentum=0.5, mass=2.0), 0.0)
print(f"guiding velocity of a k = 0.5, m = 2 packet at its center: {v:.5f} "
      f"(= k/m)")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import os

    os.makedirs("demos/out", exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 3.6))
    for j in range(0, 600, 12):
        ax.plot(out2.paths[:, j], out2.times, lw=0.4, color="tab:blue", alpha=0.6)
    ax.set(xlabel="x", ylabel="t", title="double-slit trajectories never cross x = 0")
    fig.tight_layout()
    fig.savefig("demos/out/bohm_double_slit.png", dpi=120)
    print("wrote demos/out/bohm_double_slit.png")
except ImportError:
    pass
