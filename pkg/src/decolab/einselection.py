"""Pointer-basis selection machinery.

Covers the commutativity (stability) criterion for pointer projectors, the
preferred apparatus observable built from them, purity/entropy sieving of
candidate states, a coarse regime classification by Hamiltonian norms, and
comparisons between instantaneous eigenbases of the reduced state and
candidate pointer bases, including the ill-conditioned near-degenerate 2x2
case in closed form.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import hilbert as hb
from .errors import DegenerateSpec, IncompleteFamily, InvalidProjector

PROJECTOR_TOL = 1e-10


@dataclass(frozen=True)
class InteractionSpec:
    """System self-Hamiltonian plus joint interaction Hamiltonian.

    ``h_self`` lives on the system factor alone, ``h_int`` on the full
    layout; both are Hermitian by construction of :class:`~decolab.hilbert.Observable`.
    """

    layout: hb.SpaceLayout
    h_self: hb.Observable
    h_int: hb.Observable
    system_label: str = "S"

    def __post_init__(self):
        if self.h_int.layout != self.layout:
            raise ValueError("h_int must live on the full layout")
        if self.h_self.layout.labels != (self.system_label,):
            raise ValueError(f"h_self must live on the system factor {self.system_label!r}")

    def total_hamiltonian(self) -> hb.Observable:
        big_self = hb.embed(self.h_self, self.layout)
        return hb.Observable(self.layout, big_self.matrix + self.h_int.matrix)

    def environment_labels(self) -> tuple[str, ...]:
        return tuple(l for l in self.layout.labels if l != self.system_label)


def _check_projector(p: hb.Observable, tol: float = PROJECTOR_TOL) -> None:
    m = p.matrix
    if np.max(np.abs(m @ m - m)) > tol:
        raise InvalidProjector("operator is not idempotent within tolerance")


@dataclass(frozen=True)
class CommutatorReport:
    norms: np.ndarray      # Frobenius norm of [P_n, H] per projector
    tol: float
    passed: bool


def commutes(projectors: Sequence[hb.Observable], h_int: hb.Observable,
             tol: float = 1e-10) -> CommutatorReport:
    """Stability criterion: do the pointer projectors commute with H?

    Each projector must be a Hermitian idempotent on the same layout as
    ``h_int``; embed system-side projectors first.  Returns the Frobenius
    norm of every commutator and the pass/fail verdict against ``tol``.
    """
    norms = []
    for p in projectors:
        if p.layout != h_int.layout:
            raise InvalidProjector("projector layout differs from h_int layout; embed first")
        _check_projector(p)
        comm = p.matrix @ h_int.matrix - h_int.matrix @ p.matrix
        norms.append(float(np.linalg.norm(comm)))
    norms = np.array(norms)
    return CommutatorReport(norms, tol, bool(np.all(norms <= tol)))


def preferred_observable(projectors: Sequence[hb.Observable],
                         eigenvalues: Sequence[float]) -> hb.Observable:
    """Weighted sum O = sum_n lambda_n P_n over a complete orthogonal family."""
    if len(projectors) != len(eigenvalues):
        raise ValueError("one eigenvalue per projector required")
    layout = projectors[0].layout
    total = np.zeros((layout.dim, layout.dim), dtype=complex)
    for p in projectors:
        if p.layout != layout:
            raise InvalidProjector("projectors live on different layouts")
        _check_projector(p)
        total += p.matrix
    if np.max(np.abs(total - np.eye(layout.dim))) > PROJECTOR_TOL:
        raise IncompleteFamily("projectors do not resolve the identity")
    for i, j in itertools.combinations(range(len(projectors)), 2):
        if np.max(np.abs(projectors[i].matrix @ projectors[j].matrix)) > PROJECTOR_TOL:
            raise IncompleteFamily("projectors are not mutually orthogonal")
    mat = sum(float(l) * p.matrix for l, p in zip(eigenvalues, projectors))
    return hb.Observable(layout, mat)


# ---------------------------------------------------------------------------
# predictability sieve
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SieveEntry:
    candidate: int
    purity: float
    entropy: float


@dataclass(frozen=True)
class SieveReport:
    """Candidates ranked by robustness after interacting for time t.

    Score order: purity descending, entropy ascending, then candidate index;
    the most predictable (most classical) candidate comes first.
    """

    time: float
    entries: tuple[SieveEntry, ...]

    def ranking(self) -> list[int]:
        return [e.candidate for e in self.entries]


def _joint_initial(candidate: hb.PureState, env_state, spec: InteractionSpec):
    if isinstance(env_state, hb.PureState):
        return hb.tensor([candidate, env_state])
    if isinstance(env_state, hb.DensityOperator):
        layout = hb.SpaceLayout(list(candidate.layout.factors) + list(env_state.layout.factors))
        return hb.DensityOperator(layout, np.kron(candidate.density().matrix, env_state.matrix))
    raise TypeError("env_state must be a PureState or DensityOperator")


def predictability_sieve(spec: InteractionSpec, env_state,
                         candidates: Sequence[hb.PureState], t: float) -> SieveReport:
    """Evolve each candidate (x) environment and rank by reduced-state purity.

    Candidates must be normalized states of the system factor.  Purity is the
    primary score and entropy the tie-breaker, so eigenstates of the
    interaction (which never entangle) rank strictly above superpositions
    whenever any coherence has leaked.
    """
    entries = []
    h_cache: dict[tuple, np.ndarray] = {}
    for idx, cand in enumerate(candidates):
        if cand.layout.labels != (spec.system_label,):
            raise ValueError(f"candidate {idx} is not a state of {spec.system_label!r}")
        joint = _joint_initial(cand, env_state, spec)
        key = joint.layout.labels
        if key not in h_cache:
            h_cache[key] = hb.embed(spec.total_hamiltonian(), joint.layout).matrix
        h = hb.Observable(joint.layout, h_cache[key])
        evolved = hb.evolve(joint, h, t)
        if isinstance(evolved, hb.PureState):
            rho_s = hb.reduce_pure(evolved, keep={spec.system_label})
        else:
            rho_s = hb.partial_trace(evolved, keep={spec.system_label})
        entries.append(SieveEntry(idx, hb.purity(rho_s), hb.vn_entropy(rho_s)))
    ranked = sorted(entries, key=lambda e: (-e.purity, e.entropy, e.candidate))
    return SieveReport(float(t), tuple(ranked))


# ---------------------------------------------------------------------------
# regime classification
# ---------------------------------------------------------------------------

INTERACTION_DOMINATED = "interaction_dominated"
SELF_DOMINATED = "self_dominated"
INTERMEDIATE = "intermediate"

_PREDICTIONS = {
    INTERACTION_DOMINATED: "pointer states track eigenstates of the interaction Hamiltonian",
    SELF_DOMINATED: "pointer states track energy eigenstates of the self-Hamiltonian",
    INTERMEDIATE: "pointer states interpolate between interaction and energy eigenstates",
}


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    norm_ratio: float     # ||h_int|| / ||h_self||, inf when h_self vanishes
    prediction: str


def classify_regime(spec: InteractionSpec,
                    thresholds: tuple[float, float] = (0.1, 10.0)) -> RegimeReport:
    """Classify by the spectral-norm ratio of interaction to self-Hamiltonian.

    Ratio above the high threshold: interaction-dominated; below the low
    threshold: self-dominated; otherwise intermediate.  Scale-covariant by
    construction.
    """
    low, high = thresholds
    if not (0 < low < high):
        raise ValueError("thresholds must satisfy 0 < low < high")
    n_int = float(np.linalg.norm(spec.h_int.matrix, 2))
    n_self = float(np.linalg.norm(spec.h_self.matrix, 2))
    if n_int == 0.0 and n_self == 0.0:
        raise DegenerateSpec("both Hamiltonians vanish")
    if n_self == 0.0:
        ratio = math.inf
    else:
        ratio = n_int / n_self
    if ratio > high:
        regime = INTERACTION_DOMINATED
    elif ratio < low:
        regime = SELF_DOMINATED
    else:
        regime = INTERMEDIATE
    return RegimeReport(regime, ratio, _PREDICTIONS[regime])


# ---------------------------------------------------------------------------
# near-degenerate 2x2 eigenproblem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenPairs:
    """Descending eigenvalues with their (row) eigenvectors."""

    values: tuple[float, float]
    vectors: np.ndarray = field(repr=False)


def near_degenerate_eigenvectors(delta: float, omega: complex) -> EigenPairs:
    """Exact eigenpairs of [[1/2+delta, conj(omega)], [omega, 1/2-delta]].

    Closed form chosen for conditioning: as delta -> 0 at fixed omega != 0
    the eigenvectors rotate to (+-|omega|/omega, 1)/sqrt(2), however small
    |omega| is, which is why diagonalizing a nearly degenerate decohered
    state is an unreliable way to read off pointer states.  The matrix is a
    valid state iff sqrt(delta^2 + |omega|^2) <= 1/2.
    """
    delta = float(delta)
    omega = complex(omega)
    r = math.hypot(delta, abs(omega))
    hi = 0.5 + r
    lo = 1.0 - hi  # keeps the eigenvalue sum exactly 1
    if omega == 0:
        if delta >= 0:
            vecs = np.eye(2, dtype=complex)
        else:
            vecs = np.array([[0, 1], [1, 0]], dtype=complex)
        return EigenPairs((hi, lo), vecs)
    # pick the better-conditioned null-space expression per branch
    if delta >= 0:
        v_hi = np.array([delta + r, omega])
        v_lo = np.array([np.conj(omega), -(r + delta)])
    else:
        v_hi = np.array([np.conj(omega), r - delta])
        v_lo = np.array([delta - r, omega])
    v_hi = v_hi / np.linalg.norm(v_hi)
    v_lo = v_lo / np.linalg.norm(v_lo)
    return EigenPairs((hi, lo), np.array([v_hi, v_lo]))


# ---------------------------------------------------------------------------
# instantaneous eigenbasis vs pointer candidates
# ---------------------------------------------------------------------------

def subspace_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Principal angle between the lines spanned by two vectors."""
    c = abs(np.vdot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(min(1.0, c))


def match_bases(eigvecs: np.ndarray, pointers: np.ndarray) -> tuple[tuple[int, ...], np.ndarray]:
    """Best assignment of eigenvectors to pointer candidates.

    Minimizes the summed pairwise principal angle over permutations (sizes
    here are tiny, so exhaustive search is fine).  Returns the permutation
    and the matched angles.
    """
    k = len(eigvecs)
    if len(pointers) < k:
        raise ValueError(f"need at least {k} pointer candidates, got {len(pointers)}")
    best_perm, best_angles, best_total = None, None, math.inf
    for perm in itertools.permutations(range(len(pointers)), k):
        angles = np.array([subspace_angle(eigvecs[i], pointers[perm[i]])
                           for i in range(k)])
        tot = float(np.sum(angles))
        if tot < best_total:
            best_perm, best_angles, best_total = perm, angles, tot
    return best_perm, best_angles


@dataclass(frozen=True)
class BasisComparison:
    time: float
    eigenvalues: np.ndarray
    angles: np.ndarray          # matched principal angles, eigenbasis vs pointers
    gap: float                  # smallest eigenvalue spacing
    near_degenerate: bool       # gap below 1e-6: eigenbasis ill-conditioned
    rank_deficient: bool        # (near-)zero eigenvalues present


@dataclass(frozen=True)
class SchmidtPointerReport:
    comparisons: tuple[BasisComparison, ...]


def schmidt_vs_pointer(spec: InteractionSpec, env_state, system_state: hb.PureState,
                       t: float, pointer_candidates: Sequence[hb.PureState],
                       gap_tol: float = 1e-6) -> SchmidtPointerReport:
    """Compare instantaneous reduced-state eigenbases against pointer states.

    Samples times {0, t/2, t}.  Diagonality of the reduced state in *some*
    basis is automatic; the comparison (and the degeneracy flags) show when
    that basis does or does not line up with the dynamically stable states.
    """
    joint = _joint_initial(system_state, env_state, spec)
    h = hb.embed(spec.total_hamiltonian(), joint.layout)
    pointers = np.array([p.amplitudes for p in pointer_candidates])
    comps = []
    for time in (0.0, t / 2.0, t):
        evolved = hb.evolve(joint, h, time)
        if isinstance(evolved, hb.PureState):
            rho_s = hb.reduce_pure(evolved, keep={spec.system_label})
        else:
            rho_s = hb.partial_trace(evolved, keep={spec.system_label})
        lam, vecs = np.linalg.eigh(rho_s.matrix)
        lam, vecs = lam[::-1], vecs[:, ::-1].T  # descending, rows
        _, angles = match_bases(vecs, pointers)
        gap = float(np.min(np.diff(np.sort(lam)))) if len(lam) > 1 else math.inf
        comps.append(BasisComparison(
            time=float(time), eigenvalues=lam, angles=angles, gap=gap,
            near_degenerate=gap < gap_tol,
            rank_deficient=bool(np.min(lam) < 1e-12)))
    return SchmidtPointerReport(tuple(comps))
