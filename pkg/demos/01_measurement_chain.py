"""Premeasurement, basis ambiguity, and what an environment record changes.

A measurement-like interaction copies the system basis into apparatus
pointer states without any collapse.  Two things follow immediately and
both are demonstrated below: the joint state alone does not single out
*which* observable was measured (any rotated basis works just as well),
and adding an environment that records the pointer suppresses exactly the
interference terms weighted by the overlap of its records.
"""

import numpy as np

from decolab import hilbert as hb
from decolab import measurement as ms

RT2 = 1.0 / np.sqrt(2.0)

# -- premeasure a superposition --------------------------------------------
setup = ms.MeasurementSetup(system_basis=np.eye(2), ready_state=[1, 0],
                            pointer_states=np.eye(2))
system = hb.ket("S", 2, [0.8, 0.6])
joint = ms.premeasure(system, setup)
print("joint amplitudes after premeasurement:")
print(np.round(joint.amplitudes, 6))
print("Schmidt coefficients:", np.round(
    hb.schmidt(joint, ({"S"}, {"A"})).coefficients, 6))

# -- the same state, read in a rotated basis --------------------------------
# For the singlet the rewrite works in *any* basis: the apparatus appears to
# have measured every spin direction at once.
singlet = hb.PureState(hb.SpaceLayout([("s1", 2), ("s2", 2)]),
                       np.array([0, 1, -1, 0]) * RT2)
x_basis = np.array([[RT2, RT2], [RT2, -RT2]])
res = ms.rebasis(singlet, ({"s1"}, {"s2"}), x_basis)
print("\nsinglet rewritten in the x basis:")
print("coefficients:", np.round(res.coefficients, 6),
      "| partners orthogonal:", res.partners_orthogonal,
      "| expansion unique:", res.unique)

# For a state with distinct weights the privilege disappears: partners in a
# non-matching basis stop being orthogonal.
biased = hb.PureState(hb.SpaceLayout([("s1", 2), ("s2", 2)]),
                      np.array([0.9, 0, 0, np.sqrt(1 - 0.81)], dtype=complex))
res2 = ms.rebasis(biased, ({"s1"}, {"s2"}), x_basis)
print("biased state in the x basis: partners orthogonal:",
      res2.partners_orthogonal,
      f"(max partner overlap {res2.max_partner_overlap:.3f})")

# -- let an environment record the pointer ----------------------------------
for overlap in (0.0, 0.3, 0.95):
    c = overlap
    s = np.sqrt(1 - c ** 2)
    setup_e = ms.MeasurementSetup(
        system_basis=np.eye(2), ready_state=[1, 0], pointer_states=np.eye(2),
        environment_ready=[0, 0, 1],
        environment_records=[[1, 0, 0], [c, s, 0]])
    chained = ms.chain(hb.ket("S", 2, [RT2, RT2]), setup_e)
    rho_sa = hb.partial_trace(chained.density(), keep={"S", "A"})
    print(f"record overlap {overlap:.2f}: surviving coherence "
          f"|rho_SA[0,3]| = {abs(rho_sa.matrix[0, 3]):.4f} "
          f"(= |c1 c2| * overlap)")
