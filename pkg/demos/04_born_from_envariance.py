"""Outcome probabilities from symmetry: the swap argument and the counting step.

For an entangled state with equal Schmidt amplitudes, a swap on the system
can be undone on the environment, so nothing measurable on the system can
distinguish the outcomes: their probabilities must be equal.  Unequal
rational weights m/M reduce to that case by splitting each outcome into m
equal fine-grained branches.  Every equality used in the argument is
verified numerically on the actual state vectors and reported as a residual.
"""

from fractions import Fraction

import numpy as np

from decolab import envariance as ev

# -- envariance itself --------------------------------------------------------
psi = ev.equal_weight_state(2, phases=[0.4, -1.0])
pair = ev.phase_transform(psi, [0.9, 2.2])
print("phase transform envariant:", ev.is_envariant(psi, pair))

u_s = ev._pair_swap_matrix(psi.system_basis, 2, 0, 1, 0.3, -0.7)
eta = ev.matching_counterswap_phases(psi, 0.3, -0.7)
u_e = ev._pair_swap_matrix(psi.env_basis, 2, 0, 1, *eta)
print("swap + counterswap envariant:",
      ev.is_envariant(psi, ev.PairedTransform(u_s, u_e)))
print("swap alone envariant:",
      ev.is_envariant(psi, ev.PairedTransform(u_s, np.eye(2))))

# -- equal amplitudes force equal probabilities -------------------------------
res = ev.derive_equal_probabilities(ev.equal_weight_state(3))
print("\nequal-amplitude state, K = 3:")
print("probabilities:", [str(f) for f in res.probabilities])
print("verified chain links (residuals at machine precision):")
for step in res.trace[:6]:
    print(f"  {step.label:35s} [{step.assertion:7s}] residual {step.residual:.1e}")
print(f"  ... {len(res.trace)} steps total, max residual {res.max_residual:.1e}")

# -- counting: unequal rational weights ---------------------------------------
fg = ev.fine_grain([Fraction(1, 6), Fraction(1, 3), Fraction(1, 2)])
print(f"\nweights 1/6, 1/3, 1/2 -> split into {fg.denominator} equal branches "
      f"owned by outcomes {fg.branch_owner}")
eq = ev.derive_equal_probabilities(fg.extension)
print("branch probabilities all", eq.probabilities[0],
      f"(max residual {eq.max_residual:.1e})")
print("recovered outcome probabilities:", [str(f) for f in fg.probabilities])

# irrational weights go through a rational approximation
w = 1 / np.sqrt(2)
fg2 = ev.fine_grain([w, 1 - w])
print(f"\nirrational weight 1/sqrt(2): snapped to {fg2.probabilities[0]} "
      f"(approximation error {fg2.approximation_error:.2e})")
