"""Environment-assisted invariance and the counting route to the Born rule.

A transformation acting on the system alone is *envariant* when its effect on
a joint system-environment state can be undone by a transformation acting on
the environment alone.  For equal-magnitude Schmidt coefficients, swaps of
the system pairings are envariant (the environment counterswap restores the
state), which forces equal outcome probabilities; unequal rational weights
m_k/M reduce to that case by fine-graining the environment into M equal
branches and counting.

The chain rests on four facts, named A1-A4 in the proof traces:

- A1: a unitary acting only on the other subsystem does not alter the state
  of this one.
- A2: all measurable properties of a subsystem, outcome probabilities
  included, are fixed by its state.
- A3: the subsystem states are fixed by the global state vector.
- A4: paired Schmidt outcomes are perfectly correlated (measuring the system
  index determines the environment index with certainty).

A4 is the probability-linking assumption implemented and verified here;
alternative links (defining probabilities directly through the subsystem
state, or through records) exist but are not implemented.

Every step of the equal-probability chain is checked on the actual state
vectors and reported with its numeric residual, so the derivation doubles as
a regression artifact rather than a narrative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import hilbert as hb
from .errors import ArityError, InvalidBasis, NotEqualAmplitude

ORTHO_TOL = 1e-10
AMP_TOL = 1e-12


@dataclass(frozen=True)
class SchmidtState:
    """Diagonal bipartite state sum_k c_k e^{i phi_k} |s_k>|e_k>.

    ``coefficients`` are positive; the K listed basis vectors per side must
    be orthonormal.  ``to_state`` realizes the vector on an (S, E) layout.
    """

    coefficients: np.ndarray
    phases: np.ndarray
    system_basis: np.ndarray = field(repr=False)   # rows, shape (K, dS)
    env_basis: np.ndarray = field(repr=False)      # rows, shape (K, dE)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float).reshape(-1)
        ph = np.asarray(self.phases, dtype=float).reshape(-1)
        sb_ = np.asarray(self.system_basis, dtype=complex)
        eb = np.asarray(self.env_basis, dtype=complex)
        for name, val in (("coefficients", c), ("phases", ph),
                          ("system_basis", sb_), ("env_basis", eb)):
            object.__setattr__(self, name, val)
        k = len(c)
        if np.any(c <= 0):
            raise ValueError("coefficients must be positive")
        if abs(np.sum(c ** 2) - 1.0) > AMP_TOL:
            raise ValueError("squared coefficients must sum to 1")
        if ph.shape != (k,) or sb_.shape[0] != k or eb.shape[0] != k:
            raise ValueError("need one phase and one basis pair per term")
        for rows, what in ((sb_, "system basis"), (eb, "environment basis")):
            gram = rows @ rows.conj().T
            if np.max(np.abs(gram - np.eye(k))) > ORTHO_TOL:
                raise InvalidBasis(f"{what} is not orthonormal within {ORTHO_TOL}")

    @property
    def n_terms(self) -> int:
        return len(self.coefficients)

    @property
    def dims(self) -> tuple[int, int]:
        return self.system_basis.shape[1], self.env_basis.shape[1]

    def to_state(self) -> hb.PureState:
        ds, de = self.dims
        amps = np.zeros(ds * de, dtype=complex)
        for c, ph, s, e in zip(self.coefficients, self.phases,
                               self.system_basis, self.env_basis):
            amps += c * np.exp(1j * ph) * np.kron(s, e)
        layout = hb.SpaceLayout([("S", ds), ("E", de)])
        return hb.PureState(layout, amps)


def equal_weight_state(k: int, dims: tuple[int, int] | None = None,
                       phases=None) -> SchmidtState:
    """K-term Schmidt state with equal coefficients on canonical bases."""
    ds, de = dims if dims is not None else (k, k)
    phases = np.zeros(k) if phases is None else np.asarray(phases, dtype=float)
    return SchmidtState(np.full(k, 1.0 / math.sqrt(k)), phases,
                        np.eye(ds)[:k], np.eye(de)[:k])


@dataclass(frozen=True)
class PairedTransform:
    """A system-side unitary together with its environment-side partner."""

    u_system: np.ndarray = field(repr=False)
    u_env: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("u_system", "u_env"):
            u = np.asarray(getattr(self, name), dtype=complex)
            object.__setattr__(self, name, u)
            if np.max(np.abs(u @ u.conj().T - np.eye(len(u)))) > ORTHO_TOL:
                raise ValueError(f"{name} is not unitary within {ORTHO_TOL}")

    def apply(self, psi: hb.PureState) -> hb.PureState:
        """(I x u_env)(u_system x I) |psi> on an (S, E) layout."""
        ds = psi.layout.dims[0]
        de = psi.layout.dims[1]
        m = psi.amplitudes.reshape(ds, de)
        out = self.u_system @ m @ self.u_env.T
        return hb.PureState(psi.layout, out.reshape(-1) / np.linalg.norm(out))


def is_envariant(psi: SchmidtState, pair: PairedTransform, tol: float = 1e-10) -> bool:
    """Does the environment partner undo the system transformation?

    State equality is judged up to a global phase through the fidelity
    |<after|before>| > 1 - tol.
    """
    before = psi.to_state()
    after = pair.apply(before)
    return bool(abs(before.overlap(after)) > 1.0 - tol)


# ---------------------------------------------------------------------------
# concrete transforms
# ---------------------------------------------------------------------------

def phase_transform(psi: SchmidtState, xis: Sequence[float]) -> PairedTransform:
    """Per-term phase rotation on S with the compensating rotation on E."""
    xis = np.asarray(xis, dtype=float)
    if xis.shape != (psi.n_terms,):
        raise ArityError("need one phase per Schmidt term")
    ds, de = psi.dims
    u_s = np.eye(ds, dtype=complex)
    u_e = np.eye(de, dtype=complex)
    for xi, s, e in zip(xis, psi.system_basis, psi.env_basis):
        u_s += (np.exp(1j * xi) - 1.0) * np.outer(s, s.conj())
        u_e += (np.exp(-1j * xi) - 1.0) * np.outer(e, e.conj())
    return PairedTransform(u_s, u_e)


def _pair_swap_matrix(basis: np.ndarray, dim: int, i: int, j: int,
                      xi_ij: float, xi_ji: float) -> np.ndarray:
    """Unitary exchanging basis vectors i and j with phases, identity elsewhere."""
    u = np.eye(dim, dtype=complex)
    bi, bj = basis[i], basis[j]
    u -= np.outer(bi, bi.conj()) + np.outer(bj, bj.conj())
    u += np.exp(1j * xi_ij) * np.outer(bi, bj.conj())
    u += np.exp(1j * xi_ji) * np.outer(bj, bi.conj())
    return u


def _swapped_schmidt(psi: SchmidtState, i: int, j: int,
                     xi_ij: float, xi_ji: float) -> SchmidtState:
    """Schmidt form of (u_S(i<->j) x I)|psi>.

    Term k keeps its amplitude and environment partner; the system vectors
    of terms i and j exchange, with u_S's landing phases folded in (xi_ij is
    acquired when landing on s_i, xi_ji when landing on s_j).
    """
    ph = psi.phases.copy()
    sys_b = psi.system_basis.copy()
    sys_b[i], sys_b[j] = psi.system_basis[j], psi.system_basis[i]
    ph[i], ph[j] = psi.phases[i] + xi_ji, psi.phases[j] + xi_ij
    return SchmidtState(psi.coefficients, ph, sys_b, psi.env_basis)


def swap(psi: SchmidtState, xi_12: float = 0.0, xi_21: float = 0.0) -> SchmidtState:
    """System-side swap of a two-term state: exchanges which system outcome
    each amplitude and environment partner attach to."""
    if psi.n_terms != 2:
        raise ArityError("swap is defined for two-term Schmidt states")
    return _swapped_schmidt(psi, 0, 1, xi_12, xi_21)


def matching_counterswap_phases(original: SchmidtState, xi_12: float,
                                xi_21: float) -> tuple[float, float]:
    """Environment-side phases that undo swap(original, xi_12, xi_21)."""
    ph = original.phases
    return ph[0] - ph[1] - xi_12, ph[1] - ph[0] - xi_21


def counterswap(psi: SchmidtState, eta_12: float = 0.0, eta_21: float = 0.0) -> SchmidtState:
    """Environment-side swap of a two-term state.

    eta_12 is the phase acquired when landing on the first environment
    vector, eta_21 on the second; with :func:`matching_counterswap_phases`
    this restores the pre-swap state exactly when the amplitudes are equal.
    """
    if psi.n_terms != 2:
        raise ArityError("counterswap is defined for two-term Schmidt states")
    ph = psi.phases.copy()
    env = psi.env_basis.copy()
    env[0], env[1] = psi.env_basis[1], psi.env_basis[0]
    ph[0], ph[1] = psi.phases[0] + eta_21, psi.phases[1] + eta_12
    return SchmidtState(psi.coefficients, ph, psi.system_basis, env)


# ---------------------------------------------------------------------------
# equal-probability derivation
# ---------------------------------------------------------------------------

def born_probability(psi: hb.PureState, vector: np.ndarray, side: int) -> float:
    """Outcome weight |(<v| x I)|psi>|^2 on side 0 (S) or 1 (E).

    This is the numerical verification oracle for the proof chain; the
    chain's content is that the listed symmetries force these weights to be
    equal, not how any single weight is computed.
    """
    ds, de = psi.layout.dims
    m = psi.amplitudes.reshape(ds, de)
    proj = vector.conj() @ m if side == 0 else m @ vector.conj()
    return float(np.linalg.norm(proj) ** 2)


@dataclass(frozen=True)
class ProofStep:
    label: str        # which equality of the chain
    assertion: str    # the facts licensing it (A1..A4 / restoration)
    residual: float


@dataclass(frozen=True)
class EqualProbabilityResult:
    probabilities: tuple[Fraction, ...]
    trace: tuple[ProofStep, ...]

    @property
    def max_residual(self) -> float:
        return max(s.residual for s in self.trace)


def derive_equal_probabilities(psi: SchmidtState,
                               swap_phases: tuple[float, float] = (0.3, -0.7)
                               ) -> EqualProbabilityResult:
    """Equal coefficients force p(s_k) = 1/K: the swap/counterswap chain.

    For every transposition (i, j) the five links are verified numerically:
    perfect correlation before the swap, relabeled correlation after it,
    restoration by the counterswap, and the two one-sided unaffectedness
    facts (acting on E cannot change S-weights and vice versa).  Residuals
    land at machine precision; anything larger means the state violated a
    premise.
    """
    c = psi.coefficients
    if np.max(np.abs(c - c[0])) > AMP_TOL:
        raise NotEqualAmplitude("coefficients differ beyond tolerance")
    k = psi.n_terms
    ds, de = psi.dims
    vec0 = psi.to_state()
    xi_ij, xi_ji = swap_phases
    steps: list[ProofStep] = []

    # link 1: p(s_k) = p(e_k) on the original state, for every k
    res = max(abs(born_probability(vec0, psi.system_basis[m], 0)
                  - born_probability(vec0, psi.env_basis[m], 1)) for m in range(k))
    steps.append(ProofStep("pairing correlation", "A4", res))

    for i in range(k):
        for j in range(i + 1, k):
            u_s = _pair_swap_matrix(psi.system_basis, ds, i, j, xi_ij, xi_ji)
            eta_ij = psi.phases[i] - psi.phases[j] - xi_ij
            eta_ji = psi.phases[j] - psi.phases[i] - xi_ji
            u_e = _pair_swap_matrix(psi.env_basis, de, i, j, eta_ij, eta_ji)
            swapped = PairedTransform(u_s, np.eye(de)).apply(vec0)
            restored = PairedTransform(np.eye(ds), u_e).apply(swapped)

            # link 3: after the swap, s_i pairs with e_j and s_j with e_i
            res = max(abs(born_probability(swapped, psi.system_basis[i], 0)
                          - born_probability(swapped, psi.env_basis[j], 1)),
                      abs(born_probability(swapped, psi.system_basis[j], 0)
                          - born_probability(swapped, psi.env_basis[i], 1)))
            steps.append(ProofStep(f"swap relabeling ({i},{j})", "A4", res))

            # link 2: counterswap restores the state, hence all S-weights
            fidelity_gap = 1.0 - abs(vec0.overlap(restored))
            res = max(fidelity_gap,
                      max(abs(born_probability(restored, psi.system_basis[m], 0)
                              - born_probability(vec0, psi.system_basis[m], 0))
                          for m in range(k)))
            steps.append(ProofStep(f"counterswap restoration ({i},{j})", "A2,A3", res))

            # link 4: the counterswap acted on E only, so S is untouched
            rho_a = hb.reduce_pure(restored, keep={"S"}).matrix
            rho_b = hb.reduce_pure(swapped, keep={"S"}).matrix
            steps.append(ProofStep(f"environment action leaves S ({i},{j})",
                                   "A1,A2", float(np.max(np.abs(rho_a - rho_b)))))

            # link 5: the swap acted on S only, so E is untouched
            rho_c = hb.reduce_pure(swapped, keep={"E"}).matrix
            rho_d = hb.reduce_pure(vec0, keep={"E"}).matrix
            steps.append(ProofStep(f"system action leaves E ({i},{j})",
                                   "A1,A2", float(np.max(np.abs(rho_c - rho_d)))))

            # chain conclusion for this pair
            res = abs(born_probability(vec0, psi.system_basis[i], 0)
                      - born_probability(vec0, psi.system_basis[j], 0))
            steps.append(ProofStep(f"equal weights ({i},{j})", "links 1-5", res))

    probs = tuple(Fraction(1, k) for _ in range(k))
    return EqualProbabilityResult(probs, tuple(steps))


# ---------------------------------------------------------------------------
# fine-graining / counting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FineGrainResult:
    """Counting construction for rational weights m_k / M.

    ``branch_owner[j]`` names the coarse outcome that fine-grained branch j
    belongs to; probabilities are exact rationals.  ``extension`` is the
    materialized M-term equal-weight Schmidt state over (system x ancilla |
    register) when M is small enough to hold densely, else None.
    """

    probabilities: tuple[Fraction, ...]
    counts: tuple[int, ...]
    denominator: int
    branch_owner: tuple[int, ...]
    approximation_error: float
    extension: SchmidtState | None


def fine_grain(squared_coefficients, max_denominator: int = 10 ** 6,
               materialize_limit: int = 128) -> FineGrainResult:
    """Split outcome k with weight m_k/M into m_k equal branches of 1/M.

    Exact rational inputs (Fraction, int, or "m/M" strings) are used as
    given; floats are snapped to rationals with denominator at most
    ``max_denominator`` (the continuity step) and the largest incurred gap
    is reported.  All probability arithmetic is exact; equal branch weights
    come from the envariance argument, and p(s_k) = m_k/M by additivity over
    the disjoint branches of outcome k.
    """
    fracs: list[Fraction] = []
    err = 0.0
    for w in squared_coefficients:
        if isinstance(w, (Fraction, int, str)):
            f = Fraction(w)
        else:
            f = Fraction(float(w)).limit_denominator(max_denominator)
            err = max(err, abs(float(f) - float(w)))
        if f < 0:
            raise ValueError("squared coefficients must be non-negative")
        fracs.append(f)
    if sum(fracs) != 1:
        if err == 0.0:
            raise ValueError("exact squared coefficients must sum to 1")
        gap = 1 - sum(fracs[:-1])
        err = max(err, abs(float(gap - fracs[-1])))
        fracs[-1] = gap
    m_lcm = 1
    for f in fracs:
        m_lcm = m_lcm * f.denominator // math.gcd(m_lcm, f.denominator)
    if m_lcm > max_denominator:
        raise ValueError(f"common denominator {m_lcm} exceeds {max_denominator}")
    counts = [int(f * m_lcm) for f in fracs]
    owner = tuple(k for k, m in enumerate(counts) for _ in range(m))
    probs = tuple(Fraction(m, m_lcm) for m in counts)

    extension = None
    if m_lcm <= materialize_limit:
        k = len(counts)
        ds = k * m_lcm  # system (x) ancilla-environment block
        left = np.zeros((m_lcm, ds))
        for j in range(m_lcm):
            left[j, owner[j] * m_lcm + j] = 1.0  # |s_k> (x) |ancilla_j>
        extension = SchmidtState(np.full(m_lcm, 1.0 / math.sqrt(m_lcm)),
                                 np.zeros(m_lcm), left, np.eye(m_lcm))
    return FineGrainResult(probs, tuple(counts), m_lcm, owner, err, extension)
