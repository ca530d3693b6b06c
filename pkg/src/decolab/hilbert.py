"""Dense linear algebra over labeled tensor-product Hilbert spaces.

States and operators carry a :class:`SpaceLayout` naming each tensor factor,
so that partial traces, embeddings, and bipartitions are requested by label
rather than by axis bookkeeping.  Amplitudes are stored row-major over the
factor order of the layout; this ordering is part of the serialization
contract and must not change.

All values are immutable after construction and all operations are pure
functions, so they are safe to call from concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import BadBipartition, LabelCollision, LabelNotFound, LayoutMismatch

NORM_TOL = 1e-12       # construction-time tolerance
DERIVED_TOL = 1e-10    # tolerance for derived identities
PSD_TOL = 1e-10        # allowed negative eigenvalue excursion


# ---------------------------------------------------------------------------
# layouts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpaceLayout:
    """Ordered list of labeled tensor factors ``(label, dimension)``.

    Labels must be unique and dimensions positive; the total dimension is the
    product of the factor dimensions.
    """

    factors: tuple[tuple[str, int], ...]

    def __init__(self, factors: Iterable[tuple[str, int]]):
        object.__setattr__(self, "factors", tuple((str(l), int(d)) for l, d in factors))
        labels = [l for l, _ in self.factors]
        if len(set(labels)) != len(labels):
            raise LabelCollision(f"duplicate factor labels in {labels}")
        for label, d in self.factors:
            if d < 1:
                raise ValueError(f"factor {label!r} has dimension {d} < 1")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def axis(self, label: str) -> int:
        for i, (l, _) in enumerate(self.factors):
            if l == label:
                return i
        raise LabelNotFound(f"label {label!r} not in layout {self.labels}")

    def dim_of(self, label: str) -> int:
        return self.factors[self.axis(label)][1]

    def subset(self, labels: Iterable[str]) -> "SpaceLayout":
        """Layout restricted to ``labels``, preserving this layout's order."""
        wanted = set(labels)
        unknown = wanted - set(self.labels)
        if unknown:
            raise LabelNotFound(f"labels {sorted(unknown)} not in layout {self.labels}")
        return SpaceLayout([f for f in self.factors if f[0] in wanted])

    def __str__(self) -> str:
        return ",".join(f"{l}:{d}" for l, d in self.factors)


def _as_layout(layout) -> SpaceLayout:
    if isinstance(layout, SpaceLayout):
        return layout
    return SpaceLayout(layout)


# ---------------------------------------------------------------------------
# states and operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PureState:
    """Normalized complex amplitude vector over a labeled layout."""

    layout: SpaceLayout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape != (self.layout.dim,):
            raise ValueError(f"expected {self.layout.dim} amplitudes, got {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {norm!r} deviates from 1 beyond {NORM_TOL}")
        amps.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def as_tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per factor (read-only view)."""
        return self.amplitudes.reshape(self.layout.dims)

    def overlap(self, other: "PureState") -> complex:
        """Inner product <self|other>."""
        if self.layout != other.layout:
            raise LayoutMismatch(f"{self.layout} vs {other.layout}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityOperator":
        return DensityOperator(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))


def _check_square(layout: SpaceLayout, matrix) -> np.ndarray:
    mat = np.asarray(matrix, dtype=complex)
    d = layout.dim
    if mat.shape != (d, d):
        raise ValueError(f"expected {d}x{d} matrix, got {mat.shape}")
    return mat


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace, positive-semidefinite operator on a layout."""

    layout: SpaceLayout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = _check_square(self.layout, self.matrix)
        object.__setattr__(self, "matrix", mat)
        herm = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
        if herm > NORM_TOL:
            raise ValueError(f"density matrix not Hermitian: residual {herm:.3e}")
        tr = mat.trace()
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"trace {tr!r} deviates from 1 beyond {NORM_TOL}")
        lo = float(np.linalg.eigvalsh(mat)[0])
        if lo < -PSD_TOL:
            raise ValueError(f"negative eigenvalue {lo:.3e} below -{PSD_TOL}")
        mat.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.layout.dim


@dataclass(frozen=True)
class Observable:
    """Hermitian operator on a labeled layout."""

    layout: SpaceLayout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = _check_square(self.layout, self.matrix)
        object.__setattr__(self, "matrix", mat)
        herm = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
        if herm > NORM_TOL:
            raise ValueError(f"observable not Hermitian: residual {herm:.3e}")
        mat.setflags(write=False)


@dataclass(frozen=True)
class SchmidtDecomposition:
    """Bipartite diagonal decomposition: coefficients and paired bases.

    ``coefficients`` are non-negative and descending; ``left_basis[i]`` /
    ``right_basis[i]`` are the paired orthonormal vectors, so the state is
    ``sum_i c_i |left_i> |right_i>`` in the (left, right) factor order.
    """

    coefficients: np.ndarray
    left_basis: np.ndarray   # shape (r, dim_left)
    right_basis: np.ndarray  # shape (r, dim_right)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "left_basis", np.asarray(self.left_basis, dtype=complex))
        object.__setattr__(self, "right_basis", np.asarray(self.right_basis, dtype=complex))
        if np.any(np.diff(c) > 1e-14):
            raise ValueError("Schmidt coefficients must be descending")
        if abs(np.sum(c**2) - 1.0) > 1e-10:
            raise ValueError("squared Schmidt coefficients must sum to 1")
        for rows, what in ((self.left_basis, "left"), (self.right_basis, "right")):
            gram = rows @ rows.conj().T
            if np.max(np.abs(gram - np.eye(len(rows)))) > 1e-10:
                raise ValueError(f"{what} Schmidt vectors are not orthonormal")

    @property
    def rank(self) -> int:
        return len(self.coefficients)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def basis_state(layout, index: int) -> PureState:
    """Computational-basis ket |index> (row-major over the factor order)."""
    layout = _as_layout(layout)
    amps = np.zeros(layout.dim, dtype=complex)
    amps[index] = 1.0
    return PureState(layout, amps)


def ket(label: str, dim: int, amplitudes) -> PureState:
    """Single-factor state with the given amplitudes (normalized on input)."""
    amps = np.asarray(amplitudes, dtype=complex)
    return PureState(SpaceLayout([(label, dim)]), amps / np.linalg.norm(amps))


def tensor(states: Sequence[PureState]) -> PureState:
    """Kronecker product of pure states in the given order.

    Layouts must carry disjoint labels; the product layout concatenates the
    factor lists.
    """
    if not states:
        raise ValueError("tensor() of no states")
    seen: set[str] = set()
    factors: list[tuple[str, int]] = []
    for s in states:
        for label, d in s.layout.factors:
            if label in seen:
                raise LabelCollision(f"label {label!r} appears in more than one state")
            seen.add(label)
            factors.append((label, d))
    amps = states[0].amplitudes
    for s in states[1:]:
        amps = np.kron(amps, s.amplitudes)
    return PureState(SpaceLayout(factors), amps)


def tensor_observables(obs: Sequence[Observable]) -> Observable:
    """Kronecker product of observables; labels must be disjoint."""
    seen: set[str] = set()
    factors: list[tuple[str, int]] = []
    for o in obs:
        for label, d in o.layout.factors:
            if label in seen:
                raise LabelCollision(f"label {label!r} appears in more than one operator")
            seen.add(label)
            factors.append((label, d))
    mat = obs[0].matrix
    for o in obs[1:]:
        mat = np.kron(mat, o.matrix)
    return Observable(SpaceLayout(factors), mat)


def embed(op: Observable, layout) -> Observable:
    """Extend ``op`` by identities onto ``layout`` (matching by label).

    The operator's factors may sit anywhere in the target layout; the result
    acts as ``op`` on those factors and trivially elsewhere.
    """
    layout = _as_layout(layout)
    op_labels = op.layout.labels
    for lbl in op_labels:
        if layout.dim_of(lbl) != op.layout.dim_of(lbl):
            raise LayoutMismatch(f"factor {lbl!r} has dim {layout.dim_of(lbl)} "
                                 f"in target but {op.layout.dim_of(lbl)} in operator")
    rest = [f for f in layout.factors if f[0] not in op_labels]
    rest_dim = int(np.prod([d for _, d in rest], dtype=np.int64)) if rest else 1
    big = np.kron(op.matrix, np.eye(rest_dim))
    # permute (op factors..., rest factors...) into the target factor order
    inter = SpaceLayout(list(op.layout.factors) + rest)
    perm = [inter.axis(lbl) for lbl in layout.labels]
    n = len(layout.factors)
    t = big.reshape(inter.dims + inter.dims)
    t = t.transpose(perm + [p + n for p in perm])
    return Observable(layout, t.reshape(layout.dim, layout.dim))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _split_axes(layout: SpaceLayout, keep: Iterable[str]) -> tuple[list[int], list[int]]:
    keep = set(keep)
    unknown = keep - set(layout.labels)
    if unknown:
        raise LabelNotFound(f"labels {sorted(unknown)} not in layout {layout.labels}")
    if not keep:
        raise ValueError("keep set must be nonempty")
    kept = [i for i, (l, _) in enumerate(layout.factors) if l in keep]
    traced = [i for i, (l, _) in enumerate(layout.factors) if l not in keep]
    return kept, traced


def partial_trace(rho: DensityOperator, keep: Iterable[str]) -> DensityOperator:
    """Trace out every factor not named in ``keep``.

    The result preserves the original order of the kept factors and satisfies
    all density-operator invariants; expectation values of observables on the
    kept factors are unchanged.
    """
    kept, traced = _split_axes(rho.layout, keep)
    dims = rho.layout.dims
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    # contract each traced axis against its primed partner
    for offset, ax in enumerate(sorted(traced)):
        a = ax - offset
        t = np.trace(t, axis1=a, axis2=a + (n - offset))
    sub = rho.layout.subset([rho.layout.labels[i] for i in kept])
    d = sub.dim
    mat = t.reshape(d, d)
    mat = 0.5 * (mat + mat.conj().T)  # scrub roundoff asymmetry
    return DensityOperator(sub, mat)


def reduce_pure(psi: PureState, keep: Iterable[str]) -> DensityOperator:
    """Reduced density operator of a pure state, without forming |psi><psi|.

    Fast path for large layouts: reshapes the amplitude tensor to
    (kept, traced) and contracts, costing O(d_keep^2 * d_rest).
    """
    kept, traced = _split_axes(psi.layout, keep)
    t = psi.as_tensor().transpose(kept + traced)
    d_keep = int(np.prod([psi.layout.dims[i] for i in kept], dtype=np.int64))
    m = t.reshape(d_keep, -1)
    mat = m @ m.conj().T
    mat = 0.5 * (mat + mat.conj().T)
    sub = psi.layout.subset([psi.layout.labels[i] for i in kept])
    return DensityOperator(sub, mat)


def expectation(rho: DensityOperator, obs: Observable) -> float:
    """Trace rule <O> = Tr(rho O); the tiny imaginary residue is discarded."""
    if rho.layout != obs.layout:
        raise LayoutMismatch(f"{rho.layout} vs {obs.layout}")
    val = complex(np.einsum("ij,ji->", rho.matrix, obs.matrix))
    return float(val.real)


def schmidt(psi: PureState, bipartition: tuple[Iterable[str], Iterable[str]]) -> SchmidtDecomposition:
    """Diagonal biorthogonal decomposition across a bipartition of the labels.

    Both label sets together must partition the layout.  Coefficients come
    back descending; the state reconstructs as ``sum_i c_i |l_i>|r_i>`` with
    the left (right) vectors living on the left (right) label set in layout
    order.
    """
    left, right = set(bipartition[0]), set(bipartition[1])
    labels = set(psi.layout.labels)
    if left & right or (left | right) != labels or not left or not right:
        raise BadBipartition(f"({sorted(left)}, {sorted(right)}) does not partition {sorted(labels)}")
    lax = [i for i, (l, _) in enumerate(psi.layout.factors) if l in left]
    rax = [i for i, (l, _) in enumerate(psi.layout.factors) if l in right]
    dl = int(np.prod([psi.layout.dims[i] for i in lax], dtype=np.int64))
    m = psi.as_tensor().transpose(lax + rax).reshape(dl, -1)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    r = max(1, int(np.sum(s > 1e-14)))
    return SchmidtDecomposition(s[:r], u[:, :r].T.copy(), vh[:r, :].copy())


def purity(rho: DensityOperator) -> float:
    """Tr(rho^2), in (0, 1]."""
    return float(np.vdot(rho.matrix, rho.matrix).real)


def vn_entropy(rho: DensityOperator) -> float:
    """von Neumann entropy -sum(l ln l), with 0 ln 0 = 0 (natural log)."""
    lam = np.linalg.eigvalsh(rho.matrix)
    lam = lam[lam > 1e-15]
    return float(-np.sum(lam * np.log(lam)))


def evolve(state, hamiltonian: Observable, t: float):
    """Apply exp(-i H t) (hbar = 1) to a pure state or density operator.

    The propagator is built from the eigendecomposition of the Hermitian
    Hamiltonian, which is exact at desk-scale dimensions.
    """
    if state.layout != hamiltonian.layout:
        raise LayoutMismatch(f"{state.layout} vs {hamiltonian.layout}")
    w, v = np.linalg.eigh(hamiltonian.matrix)
    u = (v * np.exp(-1j * w * t)) @ v.conj().T
    if isinstance(state, PureState):
        amps = u @ state.amplitudes
        amps = amps / np.linalg.norm(amps)
        return PureState(state.layout, amps)
    if isinstance(state, DensityOperator):
        mat = u @ state.matrix @ u.conj().T
        mat = 0.5 * (mat + mat.conj().T)
        mat = mat / mat.trace().real
        return DensityOperator(state.layout, mat)
    raise TypeError(f"cannot evolve {type(state).__name__}")


def propagator(hamiltonian: Observable, t: float) -> np.ndarray:
    """Unitary exp(-i H t) as a dense matrix."""
    w, v = np.linalg.eigh(hamiltonian.matrix)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


# ---------------------------------------------------------------------------
# three-party diagonal decompositions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TriDecomposition:
    """Result of a successful three-party diagonal decomposition search."""

    coefficients: np.ndarray            # complex alpha_i
    bases: tuple[np.ndarray, ...]       # one (r, dim_party) array per party
    residual: float                     # Euclidean distance to the input state

    def reconstruct(self) -> np.ndarray:
        out = 0
        for i, a in enumerate(self.coefficients):
            term = self.bases[0][i]
            for b in self.bases[1:]:
                term = np.kron(term, b[i])
            out = out + a * term
        return out


def _haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def tridecomposition_search(psi: PureState, tripartition, tol: float,
                            restarts: int = 200, max_iter: int = 300,
                            seed: int = 7) -> TriDecomposition | None:
    """Search for a diagonal form ``sum_i a_i |p_i>|q_i>|r_i>`` of a tripartite state.

    Such decompositions do not always exist; when one does, it is unique, but
    no constructive procedure is available in general.  This op runs an
    alternating per-party basis optimization: with two parties' bases fixed,
    the third is refreshed by a polar (Procrustes) step that maximizes the
    total diagonal weight.  Random restarts guard against local maxima.
    Returns ``None`` when no restart reaches residual < tol; absence at a
    tight tolerance after many restarts is evidence (not proof) that no
    decomposition exists.  Only three parties are supported; the analogous
    search for more parties is unexplored here.
    """
    parts = [set(p) for p in tripartition]
    labels = set(psi.layout.labels)
    if len(parts) != 3 or set.union(*parts) != labels or \
            sum(len(p) for p in parts) != len(labels) or any(not p for p in parts):
        raise BadBipartition(f"{tripartition} does not partition {sorted(labels)}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    axes = [[i for i, (l, _) in enumerate(psi.layout.factors) if l in p] for p in parts]
    dims = [int(np.prod([psi.layout.dims[i] for i in ax], dtype=np.int64)) for ax in axes]
    order = [i for ax in axes for i in ax]
    t3 = psi.as_tensor().transpose(order).reshape(dims)
    r = min(dims)
    rng = np.random.default_rng(seed)

    def diagonal_coeffs(us):
        # alpha_i = <u0_i u1_i u2_i | psi>
        w = np.einsum("abc,ai,bi,ci->i", t3, us[0].conj(), us[1].conj(), us[2].conj())
        return w

    best: TriDecomposition | None = None
    for _ in range(restarts):
        us = [_haar_unitary(d, rng)[:, :r] for d in dims]
        prev = -1.0
        for _ in range(max_iter):
            for p in range(3):
                others = [q for q in range(3) if q != p]
                # w_i[a] = contraction of psi with the other two parties' i-th vectors
                spec = {0: "abc,bi,ci->ai", 1: "abc,ai,ci->bi", 2: "abc,ai,bi->ci"}[p]
                w = np.einsum(spec, t3, us[others[0]].conj(), us[others[1]].conj())
                uu, _, vv = np.linalg.svd(w, full_matrices=False)
                us[p] = uu @ vv
            score = float(np.sum(np.abs(diagonal_coeffs(us)) ** 2))
            if score - prev < 1e-14:
                break
            prev = score
        alpha = diagonal_coeffs(us)
        residual = math.sqrt(max(0.0, 1.0 - float(np.sum(np.abs(alpha) ** 2))))
        if best is None or residual < best.residual:
            best = TriDecomposition(alpha, tuple(u.T.copy() for u in us), residual)
        if residual < tol:
            break
    if best is not None and best.residual < tol:
        return best
    return None


# ---------------------------------------------------------------------------
# textual serialization
# ---------------------------------------------------------------------------
# Format: header line "layout: label:dim,label:dim,...", then one "re,im"
# pair per entry.  A vector has dim lines, a square matrix dim^2 lines
# (row-major).  repr() formatting keeps round-trips exact.

def dumps_array(layout: SpaceLayout, array: np.ndarray) -> str:
    arr = np.asarray(array, dtype=complex).reshape(-1)
    lines = [f"layout: {layout}"]
    lines += [f"{float(z.real)!r},{float(z.imag)!r}" for z in arr]
    return "\n".join(lines) + "\n"


def loads_array(text: str) -> tuple[SpaceLayout, np.ndarray]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("layout:"):
        raise ValueError("missing 'layout:' header line")
    spec = lines[0].split(":", 1)[1].strip()
    factors = []
    for item in spec.split(","):
        label, d = item.rsplit(":", 1)
        factors.append((label.strip(), int(d)))
    layout = SpaceLayout(factors)
    vals = np.array([complex(float(a), float(b))
                     for a, b in (ln.split(",") for ln in lines[1:])])
    d = layout.dim
    if len(vals) == d:
        return layout, vals
    if len(vals) == d * d:
        return layout, vals.reshape(d, d)
    raise ValueError(f"expected {d} or {d*d} entries for layout {layout}, got {len(vals)}")


def save_state(path, psi: PureState) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_array(psi.layout, psi.amplitudes))


def load_state(path) -> PureState:
    with open(path) as fh:
        layout, arr = loads_array(fh.read())
    if arr.ndim != 1:
        raise ValueError("file holds a matrix, not a state vector")
    return PureState(layout, arr)


def save_operator(path, op) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_array(op.layout, op.matrix))


def load_observable(path) -> Observable:
    with open(path) as fh:
        layout, arr = loads_array(fh.read())
    if arr.ndim != 2:
        raise ValueError("file holds a vector, not an operator")
    return Observable(layout, arr)


def load_matrix(path) -> tuple[SpaceLayout, np.ndarray]:
    """Load a square matrix without Hermiticity constraints (e.g. a unitary)."""
    with open(path) as fh:
        layout, arr = loads_array(fh.read())
    if arr.ndim != 2:
        raise ValueError("file holds a vector, not a matrix")
    return layout, arr


def load_density(path) -> DensityOperator:
    with open(path) as fh:
        layout, arr = loads_array(fh.read())
    if arr.ndim != 2:
        raise ValueError("file holds a vector, not an operator")
    return DensityOperator(layout, arr)
