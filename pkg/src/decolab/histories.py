"""Projector histories, the decoherence functional, consistency checks,
coarse-graining, and branch-dependent eigenbasis histories.

The functional D(a, b) is evaluated in two pictures.  The default route
builds each history's chain operator C_a = P_n U ... U P_1, factors the
initial state as rho = L L+, and assembles D = V V+ from the flattened
rows V_a = vec(C_a L); this is exact, makes Hermiticity and positivity
structural, and shares common path prefixes.  The cross-check route
conjugates every projector back to the first time slot and multiplies the
conjugated projectors directly; the two must agree to 1e-10, which is one
of the standing invariants here.

Path counts grow exponentially, so evaluation is guarded to at most four
time slots, eight projectors per family, and 1024 paths total.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import hilbert as hb
from .errors import (BadGrouping, GridMismatch, InvalidProjector, NotFound,
                     SizeGuard)

FAMILY_TOL = 1e-10
MAX_TIMES = 4
MAX_PROJECTORS = 8
MAX_PATHS = 1024
MAX_HEISENBERG_PATHS = 256


# ---------------------------------------------------------------------------
# families and histories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectorFamily:
    """An exhaustive set of orthogonal projectors attached to one time."""

    time: float
    projectors: tuple[np.ndarray, ...]

    def __init__(self, time: float, projectors):
        object.__setattr__(self, "time", float(time))
        object.__setattr__(self, "projectors",
                           tuple(np.asarray(p, dtype=complex) for p in projectors))

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def __len__(self) -> int:
        return len(self.projectors)


@dataclass(frozen=True)
class FamilyDiagnostics:
    hermiticity_residual: float
    completeness_residual: float
    orthogonality_residual: float

    def ok(self, tol: float = FAMILY_TOL) -> bool:
        return max(self.hermiticity_residual, self.completeness_residual,
                   self.orthogonality_residual) <= tol


def validate_family(family: ProjectorFamily) -> FamilyDiagnostics:
    """Report how far the family is from a complete orthogonal resolution."""
    d = family.dim
    herm = max(float(np.max(np.abs(p - p.conj().T))) for p in family.projectors)
    total = sum(family.projectors)
    comp = float(np.max(np.abs(total - np.eye(d))))
    ortho = 0.0
    for i, p in enumerate(family.projectors):
        for j, q in enumerate(family.projectors):
            want = p if i == j else 0.0
            ortho = max(ortho, float(np.max(np.abs(p @ q - want))))
    return FamilyDiagnostics(herm, comp, ortho)


@dataclass(frozen=True)
class History:
    """Time-ordered projector choices: one (slot, projector index) per time."""

    choices: tuple[tuple[int, int], ...]
    branch_dependent: bool = False

    def __init__(self, choices, branch_dependent: bool = False):
        object.__setattr__(self, "choices", tuple((int(a), int(b)) for a, b in choices))
        object.__setattr__(self, "branch_dependent", bool(branch_dependent))
        slots = [a for a, _ in self.choices]
        if slots != sorted(set(slots)):
            raise GridMismatch("history slots must be strictly increasing")

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(b for _, b in self.choices)


@dataclass(frozen=True)
class DecoherenceFunctionalMatrix:
    """Complex matrix D over a list of histories; Hermitian with a real,
    non-negative diagonal.  The sum over all entries of a full fine-grained
    set equals 1 (completeness plus trace preservation)."""

    histories: tuple[History, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", v)
        n = len(self.histories)
        if v.shape != (n, n):
            raise ValueError("functional matrix shape does not match history count")
        if n and float(np.max(np.abs(v - v.conj().T))) > FAMILY_TOL:
            raise ValueError("decoherence functional must be Hermitian")
        if n and float(np.min(v.diagonal().real)) < -1e-10:
            raise ValueError("negative diagonal weight")

    def index_of(self, history: History) -> int:
        for i, h in enumerate(self.histories):
            if h.choices == history.choices:
                return i
        raise NotFound(f"history {history.choices} not in functional")

    def total(self) -> float:
        return float(np.sum(self.values).real)


# ---------------------------------------------------------------------------
# functional evaluation
# ---------------------------------------------------------------------------

def _check_inputs(families: Sequence[ProjectorFamily], rho0: hb.DensityOperator,
                  propagators: Sequence[np.ndarray]) -> None:
    if not families:
        raise ValueError("need at least one projector family")
    if len(families) > MAX_TIMES:
        raise SizeGuard(f"at most {MAX_TIMES} time slots supported")
    times = [f.time for f in families]
    if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
        raise GridMismatch("family times must be strictly increasing")
    if len(propagators) != len(families) - 1:
        raise GridMismatch(f"need {len(families) - 1} propagators, got {len(propagators)}")
    d = rho0.dim
    for f in families:
        if len(f) > MAX_PROJECTORS:
            raise SizeGuard(f"at most {MAX_PROJECTORS} projectors per family")
        if f.dim != d:
            raise GridMismatch("family dimension does not match the state")
        diag = validate_family(f)
        if not diag.ok():
            raise InvalidProjector(f"family at t={f.time} fails validation: {diag}")
    for u in propagators:
        u = np.asarray(u)
        if u.shape != (d, d) or np.max(np.abs(u @ u.conj().T - np.eye(d))) > 1e-10:
            raise GridMismatch("propagators must be unitaries matching the state dimension")
    n_paths = math.prod(len(f) for f in families)
    if n_paths > MAX_PATHS:
        raise SizeGuard(f"{n_paths} paths exceed the guard of {MAX_PATHS}")


def _all_histories(families: Sequence[ProjectorFamily]) -> list[History]:
    ranges = [range(len(f)) for f in families]
    return [History(tuple(enumerate(combo))) for combo in itertools.product(*ranges)]


def _chain_operators(families, propagators, histories) -> list[np.ndarray]:
    """C_a = P_n U_{n-1} ... U_1 P_1 for each history, sharing prefixes."""
    cache: dict[tuple[int, ...], np.ndarray] = {}

    def build(prefix: tuple[int, ...]) -> np.ndarray:
        if prefix in cache:
            return cache[prefix]
        level = len(prefix) - 1
        p = families[level].projectors[prefix[-1]]
        if level == 0:
            out = p
        else:
            out = p @ (propagators[level - 1] @ build(prefix[:-1]))
        cache[prefix] = out
        return out

    return [build(h.indices) for h in histories]


def _psd_sqrt(rho: hb.DensityOperator) -> np.ndarray:
    lam, vec = np.linalg.eigh(rho.matrix)
    lam = np.clip(lam, 0.0, None)
    return vec * np.sqrt(lam)


def decoherence_functional(families: Sequence[ProjectorFamily],
                           rho0: hb.DensityOperator,
                           propagators: Sequence[np.ndarray],
                           histories: Sequence[History] | None = None,
                           picture: str = "schrodinger") -> DecoherenceFunctionalMatrix:
    """Evaluate D(a, b) over the given (default: all fine-grained) histories.

    ``rho0`` is the state at the first projection time; ``propagators[i]``
    carries it from slot i to slot i+1.  ``picture`` selects the evaluation
    route; both give the same matrix to 1e-10 and tests hold them to that.
    """
    _check_inputs(families, rho0, propagators)
    if histories is None:
        histories = _all_histories(families)
    else:
        histories = list(histories)
        for h in histories:
            if len(h.choices) != len(families):
                raise GridMismatch("history length does not match family count")
    if picture == "schrodinger":
        chains = _chain_operators(families, propagators, histories)
        left = _psd_sqrt(rho0)
        v = np.array([(c @ left).ravel() for c in chains])
        values = v @ v.conj().T
    elif picture == "heisenberg":
        if len(histories) > MAX_HEISENBERG_PATHS:
            raise SizeGuard("direct pair evaluation guarded to "
                            f"{MAX_HEISENBERG_PATHS} histories")
        # conjugate every projector back to the first slot, then multiply
        w = np.eye(rho0.dim, dtype=complex)
        moved: list[list[np.ndarray]] = []
        for i, fam in enumerate(families):
            if i > 0:
                w = np.asarray(propagators[i - 1]) @ w
            moved.append([w.conj().T @ p @ w for p in fam.projectors])
        ops = []
        for h in histories:
            k = moved[0][h.indices[0]]
            for lvl in range(1, len(families)):
                k = moved[lvl][h.indices[lvl]] @ k
            ops.append(k)
        values = np.empty((len(histories), len(histories)), dtype=complex)
        for a, ka in enumerate(ops):
            for b, kb in enumerate(ops):
                values[a, b] = np.trace(ka @ rho0.matrix @ kb.conj().T)
        values = 0.5 * (values + values.conj().T)
    else:
        raise ValueError(f"unknown picture {picture!r}")
    return DecoherenceFunctionalMatrix(tuple(histories), values)


def probability(history: History, functional: DecoherenceFunctionalMatrix) -> float:
    """p(history) = D(history, history)."""
    i = functional.index_of(history)
    return float(functional.values[i, i].real)


@dataclass(frozen=True)
class ConsistencyReport:
    mode: str
    max_violation: float
    tol: float
    passed: bool
    worst_pair: tuple[int, int] | None


def check_consistency(functional: DecoherenceFunctionalMatrix, mode: str = "medium",
                      tol: float = 1e-8) -> ConsistencyReport:
    """Largest off-diagonal magnitude (medium) or real part (weak) vs tol.

    Weak consistency is exactly what probability additivity under
    coarse-graining requires; medium demands the whole off-diagonal vanish.
    The default tolerance is a user knob, not a physical claim.
    """
    v = functional.values
    n = len(functional.histories)
    worst, pair = 0.0, None
    for a in range(n):
        for b in range(a + 1, n):
            if mode == "medium":
                mag = abs(v[a, b])
            elif mode == "weak":
                mag = abs(v[a, b].real)
            else:
                raise ValueError(f"unknown mode {mode!r}")
            if mag > worst:
                worst, pair = float(mag), (a, b)
    return ConsistencyReport(mode, worst, tol, worst <= tol, pair)


# ---------------------------------------------------------------------------
# coarse-graining
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoarseGrainResult:
    combined_probability: float
    member_probability_sum: float

    @property
    def violation(self) -> float:
        return self.combined_probability - self.member_probability_sum


def coarse_grain(families: Sequence[ProjectorFamily], rho0: hb.DensityOperator,
                 propagators: Sequence[np.ndarray],
                 grouping: Sequence[Sequence[int]]) -> CoarseGrainResult:
    """Combine projectors per time slot and compare against the sum rule.

    ``grouping[i]`` lists the projector indices merged at slot i.  The
    violation is the interference between the grouped histories, i.e.
    sum of 2 Re D(a, b) over distinct members; it vanishes exactly when the
    grouped pairs are weakly consistent.
    """
    if len(grouping) != len(families):
        raise BadGrouping("need one index group per time slot")
    groups: list[tuple[int, ...]] = []
    for g, fam in zip(grouping, families):
        idx = tuple(int(i) for i in g)
        if len(idx) == 0 or len(set(idx)) != len(idx) or \
                any(i < 0 or i >= len(fam) for i in idx):
            raise BadGrouping(f"invalid projector group {idx}")
        groups.append(idx)
    _check_inputs(families, rho0, propagators)
    # the combined history is evaluated directly: a merged Q is a projector,
    # but a single Q is not a complete family, so it bypasses family checks
    chain = None
    for lvl, (f, g) in enumerate(zip(families, groups)):
        q = sum(f.projectors[i] for i in g)
        chain = q if lvl == 0 else q @ (np.asarray(propagators[lvl - 1]) @ chain)
    left = _psd_sqrt(rho0)
    p_combined = float(np.linalg.norm(chain @ left) ** 2)

    members = [History(tuple(enumerate(combo))) for combo in itertools.product(*groups)]
    d_members = decoherence_functional(families, rho0, propagators, histories=members)
    member_sum = float(np.trace(d_members.values).real)
    return CoarseGrainResult(p_combined, member_sum)


# ---------------------------------------------------------------------------
# branch-dependent eigenbasis histories
# ---------------------------------------------------------------------------

def _grouped_eigenprojectors(mat: np.ndarray, gap_tol: float):
    """Eigenprojectors with near-degenerate eigenvalues merged.

    Returns (projectors, grouped eigenvalue means, degenerate flags); merging
    within ``gap_tol`` avoids the ill-conditioned eigenvectors that raw
    diagonalization produces near degeneracy.
    """
    lam, vec = np.linalg.eigh(mat)
    order = np.argsort(lam)[::-1]
    lam, vec = lam[order], vec[:, order]
    groups: list[list[int]] = [[0]]
    for i in range(1, len(lam)):
        if abs(lam[i] - lam[groups[-1][-1]]) < gap_tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    projs, vals, flags = [], [], []
    for g in groups:
        v = vec[:, g]
        projs.append(v @ v.conj().T)
        vals.append(float(np.mean(lam[g])))
        flags.append(len(g) > 1)
    return projs, vals, flags


@dataclass(frozen=True)
class SchmidtBranchNode:
    """One branch-dependent family: eigenprojectors of the path-projected
    reduced state reaching this node."""

    prefix: tuple[int, ...]
    time_index: int
    projectors: tuple[np.ndarray, ...]
    eigenvalues: tuple[float, ...]
    degenerate_flags: tuple[bool, ...]
    commutator_residual: float
    weight: float


@dataclass(frozen=True)
class SchmidtHistorySet:
    times: tuple[float, ...]
    nodes: dict[tuple[int, tuple[int, ...]], SchmidtBranchNode]
    leaf_probabilities: dict[tuple[int, ...], float]

    def node(self, time_index: int, prefix: tuple[int, ...] = ()) -> SchmidtBranchNode:
        return self.nodes[(time_index, tuple(prefix))]


def _raw_reduce(mat: np.ndarray, layout: hb.SpaceLayout, keep) -> np.ndarray:
    """Partial trace on a plain matrix, no state invariants enforced.

    Branch path matrices are unnormalized and may carry weights near the
    floor, where normalizing into a strict density operator would amplify
    roundoff beyond its positivity tolerance.
    """
    keep = set(keep)
    dims = layout.dims
    n = len(dims)
    kept = [i for i, (l, _) in enumerate(layout.factors) if l in keep]
    traced = [i for i in range(n) if i not in kept]
    t = mat.reshape(dims + dims)
    for offset, ax in enumerate(sorted(traced)):
        a = ax - offset
        t = np.trace(t, axis1=a, axis2=a + (n - offset))
    d = int(np.prod([dims[i] for i in kept], dtype=np.int64))
    out = t.reshape(d, d)
    return 0.5 * (out + out.conj().T)


def schmidt_history_projectors(initial, propagators: Sequence[np.ndarray],
                               times: Sequence[float], system_labels,
                               gap_tol: float = 1e-8,
                               weight_floor: float = 1e-12) -> SchmidtHistorySet:
    """Branch-dependent histories from path-projected reduced eigenbases.

    ``initial`` is the full system+environment state at times[0];
    ``propagators[i]`` is the full-space unitary from times[i] to times[i+1].
    At each slot the family for a branch is the set of (degeneracy-grouped)
    eigenprojectors of that branch's reduced state, which by construction
    commute with it; the residual is verified against 1e-8 and recorded.
    Branch weights are the diagonal decoherence-functional probabilities and
    sum to one over the leaves.
    """
    if isinstance(initial, hb.PureState):
        rho_full = initial.density()
    elif isinstance(initial, hb.DensityOperator):
        rho_full = initial
    else:
        raise TypeError("initial must be a PureState or DensityOperator")
    layout = rho_full.layout
    if len(propagators) != len(times) - 1:
        raise GridMismatch(f"need {len(times) - 1} propagators for {len(times)} times")
    keep = set(system_labels)
    sys_layout = layout.subset(keep)
    d_sys = sys_layout.dim

    nodes: dict[tuple[int, tuple[int, ...]], SchmidtBranchNode] = {}
    leaves: dict[tuple[int, ...], float] = {}
    # frontier: branch prefix -> unnormalized full-space path matrix
    frontier: dict[tuple[int, ...], np.ndarray] = {(): rho_full.matrix}

    for ti in range(len(times)):
        if ti > 0:
            u = np.asarray(propagators[ti - 1])
            frontier = {pre: u @ m @ u.conj().T for pre, m in frontier.items()}
        new_frontier: dict[tuple[int, ...], np.ndarray] = {}
        for prefix, mat in frontier.items():
            weight = float(np.trace(mat).real)
            red = _raw_reduce(mat, layout, keep) / weight
            projs, vals, flags = _grouped_eigenprojectors(red, gap_tol)
            resid = max(float(np.max(np.abs(p @ red - red @ p)))
                        for p in projs)
            if resid > 1e-8:
                raise InvalidProjector(f"eigenprojector commutator residual {resid:.2e}")
            nodes[(ti, prefix)] = SchmidtBranchNode(
                prefix, ti, tuple(projs), tuple(vals), tuple(flags), resid, weight)
            for a, p in enumerate(projs):
                big = hb.embed(hb.Observable(sys_layout, p), layout).matrix
                child = big @ mat @ big
                w = float(np.trace(child).real)
                if w > weight_floor:
                    if ti == len(times) - 1:
                        leaves[prefix + (a,)] = w
                    else:
                        new_frontier[prefix + (a,)] = child
                elif ti == len(times) - 1:
                    leaves[prefix + (a,)] = max(w, 0.0)
        frontier = new_frontier
    return SchmidtHistorySet(tuple(float(t) for t in times), nodes, leaves)


def projector_set_distance(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> float:
    """Symmetric Hausdorff-style distance between two projector sets.

    Used as the instability metric when a time point is added or removed:
    stable (pointer-aligned) grids give ~0, interference-dominated grids
    move the later families substantially.
    """
    def one_sided(xs, ys):
        return max(min(float(np.linalg.norm(x - y)) for y in ys) for x in xs)

    return max(one_sided(a, b), one_sided(b, a))


# ---------------------------------------------------------------------------
# reduced-evolution comparison
# ---------------------------------------------------------------------------

def _trace_out_env(mat: np.ndarray, d_sys: int, d_env: int) -> np.ndarray:
    return mat.reshape(d_sys, d_env, d_sys, d_env).trace(axis1=1, axis2=3)


def reduced_functional_discrepancy(families: Sequence[ProjectorFamily],
                                   initial, propagators: Sequence[np.ndarray],
                                   system_labels,
                                   env_ref: np.ndarray | None = None):
    """Compare D from the full state against a reduced, time-local evaluation.

    The reduced route propagates system operators with the memoryless map
    X -> Tr_E[ U (X x rho_E) U+ ] built on a fixed reference environment
    state (the initial one unless given).  When the reduced dynamics really
    are insensitive to system-environment correlations the two functionals
    coincide; the returned maximum entrywise discrepancy measures how far
    that assumption holds.  A single propagation interval from a product
    state is always exact; memory shows up from the second interval on.
    """
    if isinstance(initial, hb.PureState):
        rho_full = initial.density()
    else:
        rho_full = initial
    layout = rho_full.layout
    keep = set(system_labels)
    sys_layout = layout.subset(keep)
    env_labels = [l for l in layout.labels if l not in keep]
    # reorder so the system factors come first: simplifies the map algebra
    perm_layout = hb.SpaceLayout([layout.factors[layout.axis(l)]
                                  for l in list(sys_layout.labels) + env_labels])
    d_sys, d_env = sys_layout.dim, layout.dim // sys_layout.dim

    def to_perm(mat):
        n = len(layout.factors)
        perm = [layout.axis(l) for l in perm_layout.labels]
        t = mat.reshape(layout.dims + layout.dims)
        return t.transpose(perm + [p + n for p in perm]).reshape(layout.dim, layout.dim)

    rho_p = to_perm(rho_full.matrix)
    props_p = [to_perm(np.asarray(u)) for u in propagators]
    if env_ref is not None:
        rho_env = np.asarray(env_ref, dtype=complex)
    else:
        rho_env = rho_p.reshape(d_sys, d_env, d_sys, d_env).trace(axis1=0, axis2=2)

    full_families = [ProjectorFamily(f.time, [hb.embed(hb.Observable(sys_layout, p),
                                                       perm_layout).matrix
                                              for p in f.projectors])
                     for f in families]
    rho0 = hb.DensityOperator(perm_layout, rho_p)
    d_full = decoherence_functional(full_families, rho0, props_p)

    def step_map(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        big = u @ np.kron(x, rho_env) @ u.conj().T
        return _trace_out_env(big, d_sys, d_env)

    histories = _all_histories(families)
    rho_s = _trace_out_env(rho_p, d_sys, d_env)
    n = len(histories)
    values = np.empty((n, n), dtype=complex)
    for a, ha in enumerate(histories):
        for b, hbist in enumerate(histories):
            x = families[0].projectors[ha.indices[0]] @ rho_s \
                @ families[0].projectors[hbist.indices[0]]
            for lvl in range(1, len(families)):
                x = step_map(x, props_p[lvl - 1])
                x = families[lvl].projectors[ha.indices[lvl]] @ x \
                    @ families[lvl].projectors[hbist.indices[lvl]]
            values[a, b] = np.trace(x)
    disc = float(np.max(np.abs(values - d_full.values)))
    return disc, d_full.values, values
