"""Histories, consistency, and where classical probability rules break.

The decoherence functional assigns a complex weight to every pair of
projector histories; its diagonal holds candidate probabilities and its
off-diagonal the interference that decides whether those probabilities can
be added.  The script walks a double-slit-style qubit (sum rule broken), an
automatically consistent family (evolved eigenprojectors), and the
branch-dependent eigenbasis histories of the spin-bath model, whose
stability depends entirely on placing projections after decoherence has
acted.
"""

import math

import numpy as np

from decolab import hilbert as hb
from decolab import histories as hi
from decolab import spinbath as sb

RT2 = 1.0 / math.sqrt(2.0)

# -- interference breaks the sum rule ----------------------------------------
rho = hb.ket("S", 2, [RT2, RT2]).density()
theta = math.pi / 3
u = np.array([[math.cos(theta / 2), -math.sin(theta / 2)],
              [math.sin(theta / 2), math.cos(theta / 2)]], dtype=complex)
zfam = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
fams = [hi.ProjectorFamily(0.0, zfam), hi.ProjectorFamily(1.0, zfam)]
d = hi.decoherence_functional(fams, rho, [u])
print("4x4 decoherence functional (Re):")
print(np.round(d.values.real, 4))
print("weak consistency:", hi.check_consistency(d, "weak", 1e-8).passed)
res = hi.coarse_grain(fams, rho, [u], [(0, 1), (0,)])
print(f"coarse-grained probability {res.combined_probability:.4f} vs "
      f"member sum {res.member_probability_sum:.4f}: "
      f"violation {res.violation:+.4f}")

# -- evolved eigenprojectors: consistency for free ----------------------------
rng = np.random.default_rng(0)
z = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
rho_mat = z @ z.conj().T
rho_mat /= np.trace(rho_mat).real
_, vec = np.linalg.eigh(rho_mat)
projs = [np.outer(vec[:, i], vec[:, i].conj()) for i in range(4)]
q, r = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
u2 = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
fams2 = [hi.ProjectorFamily(0.0, projs),
         hi.ProjectorFamily(1.0, [u2 @ pr @ u2.conj().T for pr in projs])]
rho4 = hb.DensityOperator(hb.SpaceLayout([("S", 4)]), rho_mat)
d2 = hi.decoherence_functional(fams2, rho4, [u2])
print("\nevolved-eigenprojector family: medium consistency max off-diagonal =",
      f"{hi.check_consistency(d2, 'medium').max_violation:.2e}")
print("pictures agree to",
      f"{np.max(np.abs(d2.values - hi.decoherence_functional(fams2, rho4, [u2], picture='heisenberg').values)):.2e}")

# -- branch-dependent eigenbasis histories on the spin bath -------------------
p = sb.homogeneous_params(6, 0.5, 1.0, a=0.6, b=0.8)
grid = [math.pi / 4, 3 * math.pi / 4]  # both sit where z(t) = 0
u_step = hb.propagator(sb.hamiltonian(p), grid[1] - grid[0])
out = hi.schmidt_history_projectors(sb.brute_force_evolve(p, grid[0]),
                                    [u_step], grid, {"S"})
print("\nspin-bath eigenbasis histories on a decohered grid:")
for branch, weight in sorted(out.leaf_probabilities.items()):
    print(f"  branch {branch}: probability {weight:.4f}")
print("(weights reproduce the populations 0.36 / 0.64; projectors sit on the "
      "pointer states because each grid point lands after full dephasing)")

# memory check: can the reduced state alone reproduce the functional?
px = [0.5 * np.array([[1, 1], [1, 1]]), 0.5 * np.array([[1, -1], [-1, 1]])]
fams_x = [hi.ProjectorFamily(t, px) for t in (0.0, 0.4, 0.8)]
u_m = hb.propagator(sb.hamiltonian(p), 0.4)
disc, _, _ = hi.reduced_functional_discrepancy(
    fams_x, sb.initial_state(p), [u_m, u_m], {"S"})
print(f"\nreduced (memoryless) vs full functional discrepancy: {disc:.3e} "
      "(the bath remembers earlier correlations)")
