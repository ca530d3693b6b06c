"""How the interaction picks the pointer basis, and why raw diagonalization
of the reduced state is not a substitute.

Three pieces: the commutativity (stability) criterion selects the basis the
interaction Hamiltonian cannot disturb; the predictability sieve ranks
candidate states by how pure they stay; and the near-degenerate 2x2 example
shows the eigenbasis of an almost-maximally-mixed state swinging far away
from the pointer basis at the slightest residual coherence.
"""

import numpy as np

from decolab import einselection as es
from decolab import hilbert as hb
from decolab import spinbath as sb

RT2 = 1.0 / np.sqrt(2.0)
SYS = hb.SpaceLayout([("S", 2)])

p = sb.homogeneous_params(6, 0.5, 0.9, a=0.6, b=0.8)
layout = sb.bath_layout(p)
h_int = sb.hamiltonian(p)

# -- stability criterion ------------------------------------------------------
z_projs = [hb.embed(hb.Observable(SYS, np.diag([1.0, 0.0])), layout),
           hb.embed(hb.Observable(SYS, np.diag([0.0, 1.0])), layout)]
x_projs = [hb.embed(hb.Observable(SYS, 0.5 * np.array([[1, s], [s, 1]])), layout)
           for s in (+1.0, -1.0)]
print("commutator norms with the interaction Hamiltonian:")
print("  pointer (z) projectors:", es.commutes(z_projs, h_int).norms)
print("  rotated (x) projectors:", np.round(es.commutes(x_projs, h_int).norms, 3))

o_a = es.preferred_observable(
    [hb.Observable(SYS, np.diag([1.0, 0.0])), hb.Observable(SYS, np.diag([0.0, 1.0]))],
    [+1.0, -1.0])
print("preferred apparatus observable (weights +1/-1):")
print(o_a.matrix.real)

# -- predictability sieve -----------------------------------------------------
spec = es.InteractionSpec(layout, hb.Observable(SYS, np.zeros((2, 2))), h_int)
env_layout = hb.SpaceLayout([(f"E{k+1}", 2) for k in range(p.n_env)])
amps = np.ones(1, dtype=complex)
for alpha, beta in p.env_amps:
    amps = np.kron(amps, np.array([alpha, beta]))
env = hb.PureState(env_layout, amps)
names = ["up", "down", "plus", "minus"]
cands = [hb.PureState(SYS, v) for v in
         (np.array([1.0, 0]), np.array([0, 1.0]),
          np.array([RT2, RT2]), np.array([RT2, -RT2]))]
rep = es.predictability_sieve(spec, env, cands, t=0.8)
print("\npredictability sieve at t = 0.8 (purity, entropy):")
for e in rep.entries:
    print(f"  {names[e.candidate]:5s}  {e.purity:.6f}  {e.entropy:.6f}")

print("\nregime:", es.classify_regime(spec).regime,
      "->", es.classify_regime(spec).prediction)

# -- the near-degenerate trap -------------------------------------------------
print("\neigenvectors of [[1/2+d, w],[w, 1/2-d]] as d -> 0 at w = 1e-3:")
for delta in (1e-2, 1e-4, 1e-8):
    pairs = es.near_degenerate_eigenvectors(delta, 1e-3)
    lead = pairs.vectors[0] / pairs.vectors[0][1]
    print(f"  d = {delta:7.0e}: leading eigenvector ~ ({lead[0].real:+.3f}, 1)")
print("  (at d = 0 the eigenvectors sit at (+-1, 1)/sqrt(2), not at the "
      "pointer states (1,0), (0,1))")
