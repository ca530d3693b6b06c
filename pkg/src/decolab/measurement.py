"""Von Neumann premeasurement, the environment-extended chain, and basis
ambiguity demonstrations.

The correlating maps are specified only on the physical input subspace
(system basis states paired with the ready pointer); they are completed to
genuine unitaries on the full joint space by a deterministic Gram-Schmidt
extension, so norm preservation is structural rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np
import yaml

from . import hilbert as hb
from .errors import BadBipartition, InvalidBasis, InvalidSetup

ORTHO_TOL = 1e-10


def _as_matrix(vectors) -> np.ndarray:
    """Stack vectors as rows of a complex matrix."""
    return np.asarray(vectors, dtype=complex)


def _check_orthonormal(rows: np.ndarray, what: str, tol: float = ORTHO_TOL) -> None:
    gram = rows @ rows.conj().T
    if np.max(np.abs(gram - np.eye(len(rows)))) > tol:
        raise InvalidSetup(f"{what} is not orthonormal within {tol}")


def _complete_basis(rows: np.ndarray, dim: int) -> np.ndarray:
    """Extend orthonormal rows to a full orthonormal basis of C^dim.

    Deterministic: sweeps the canonical basis vectors in order, keeping each
    residual whose norm survives projection removal.
    """
    basis = [r for r in rows]
    for j in range(dim):
        if len(basis) == dim:
            break
        v = np.zeros(dim, dtype=complex)
        v[j] = 1.0
        for b in basis:
            v -= np.vdot(b, v) * b
        n = np.linalg.norm(v)
        if n > 1e-7:
            basis.append(v / n)
    if len(basis) != dim:
        raise InvalidSetup("could not complete basis (input not orthonormal?)")
    return np.array(basis)


def correlation_unitary(inputs: np.ndarray, images: np.ndarray) -> np.ndarray:
    """Unitary sending each input row to its image row, completed elsewhere.

    Inputs and images must each be orthonormal families of equal size.
    """
    dim = inputs.shape[1]
    xc = _complete_basis(inputs, dim)
    yc = _complete_basis(images, dim)
    return yc.T @ xc.conj()


@dataclass(frozen=True)
class MeasurementSetup:
    """Bases defining a premeasurement interaction.

    ``system_basis`` lists the measured states, ``pointer_states`` the
    apparatus records, ``ready_state`` the pre-interaction pointer.  When the
    environment fields are present the chain op is available.  Environment
    records must be normalized but are deliberately allowed to overlap:
    partial overlap is what produces partially suppressed interference.
    """

    system_basis: np.ndarray = field(repr=False)
    ready_state: np.ndarray = field(repr=False)
    pointer_states: np.ndarray = field(repr=False)
    environment_ready: np.ndarray | None = field(default=None, repr=False)
    environment_records: np.ndarray | None = field(default=None, repr=False)
    system_label: str = "S"
    apparatus_label: str = "A"
    environment_label: str = "E"

    def __post_init__(self):
        object.__setattr__(self, "system_basis", _as_matrix(self.system_basis))
        object.__setattr__(self, "ready_state",
                           np.asarray(self.ready_state, dtype=complex).reshape(-1))
        object.__setattr__(self, "pointer_states", _as_matrix(self.pointer_states))
        _check_orthonormal(self.system_basis, "system basis")
        _check_orthonormal(self.pointer_states, "pointer basis")
        if abs(np.linalg.norm(self.ready_state) - 1.0) > ORTHO_TOL:
            raise InvalidSetup("ready state is not normalized")
        if len(self.system_basis) != len(self.pointer_states):
            raise InvalidSetup("system and pointer state counts differ")
        if (self.environment_ready is None) != (self.environment_records is None):
            raise InvalidSetup("environment fields must be given together")
        if self.environment_records is not None:
            object.__setattr__(self, "environment_records",
                               _as_matrix(self.environment_records))
            object.__setattr__(self, "environment_ready",
                               np.asarray(self.environment_ready, dtype=complex).reshape(-1))
            if len(self.environment_records) != len(self.system_basis):
                raise InvalidSetup("environment record count differs from system basis")
            if abs(np.linalg.norm(self.environment_ready) - 1.0) > ORTHO_TOL:
                raise InvalidSetup("environment ready state is not normalized")
            norms = np.linalg.norm(self.environment_records, axis=1)
            if np.max(np.abs(norms - 1.0)) > ORTHO_TOL:
                raise InvalidSetup("environment records must be normalized")

    @property
    def has_environment(self) -> bool:
        return self.environment_records is not None

    @property
    def outcome_count(self) -> int:
        return len(self.system_basis)


def _system_coefficients(system: hb.PureState, setup: MeasurementSetup) -> np.ndarray:
    c = setup.system_basis.conj() @ system.amplitudes
    residual = np.linalg.norm(system.amplitudes - setup.system_basis.T @ c)
    if residual > ORTHO_TOL:
        raise InvalidSetup(f"system state has weight {residual:.3e} outside the measured basis")
    return c


def premeasure_unitary(setup: MeasurementSetup) -> np.ndarray:
    """The correlating unitary on the joint system-apparatus space."""
    inputs = np.array([np.kron(s, setup.ready_state) for s in setup.system_basis])
    images = np.array([np.kron(s, a) for s, a in
                       zip(setup.system_basis, setup.pointer_states)])
    return correlation_unitary(inputs, images)


def premeasure(system: hb.PureState, setup: MeasurementSetup) -> hb.PureState:
    """Correlate a system state with the apparatus: sum_n c_n |s_n>|a_n>."""
    _system_coefficients(system, setup)
    u = premeasure_unitary(setup)
    joint = u @ np.kron(system.amplitudes, setup.ready_state)
    layout = hb.SpaceLayout(list(system.layout.factors)
                            + [(setup.apparatus_label, len(setup.ready_state))])
    return hb.PureState(layout, joint / np.linalg.norm(joint))


def record_unitary(setup: MeasurementSetup) -> np.ndarray:
    """Apparatus-environment unitary sending |a_n>|e_0> to |a_n>|e_n>.

    The images stay orthonormal even for overlapping records because the
    pointer states are orthogonal, so the completion is always possible.
    """
    if not setup.has_environment:
        raise InvalidSetup("setup has no environment fields")
    inputs = np.array([np.kron(a, setup.environment_ready) for a in setup.pointer_states])
    images = np.array([np.kron(a, e) for a, e in
                       zip(setup.pointer_states, setup.environment_records)])
    return correlation_unitary(inputs, images)


def chain(system: hb.PureState, setup: MeasurementSetup) -> hb.PureState:
    """Two-step measurement chain: premeasure, then environment monitoring.

    Step one correlates system and apparatus, step two lets the environment
    record the pointer, giving sum_n c_n |s_n>|a_n>|e_n>.
    """
    if not setup.has_environment:
        raise InvalidSetup("chain requires environment fields in the setup")
    _system_coefficients(system, setup)
    d_a = len(setup.ready_state)
    d_e = len(setup.environment_ready)
    psi0 = np.kron(np.kron(system.amplitudes, setup.ready_state), setup.environment_ready)
    u1 = np.kron(premeasure_unitary(setup), np.eye(d_e))
    u2 = np.kron(np.eye(system.dim), record_unitary(setup))
    joint = u2 @ (u1 @ psi0)
    layout = hb.SpaceLayout(list(system.layout.factors)
                            + [(setup.apparatus_label, d_a),
                               (setup.environment_label, d_e)])
    return hb.PureState(layout, joint / np.linalg.norm(joint))


# ---------------------------------------------------------------------------
# basis ambiguity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RebasisResult:
    """Expansion of a bipartite state over a chosen basis for side 1.

    The state equals ``sum_n coefficients[n] |basis_n>|partner_n>`` exactly;
    ``partners_orthogonal`` records whether the induced side-2 vectors are
    mutually orthogonal (true only in the Schmidt basis when coefficients are
    distinct), and ``unique`` is false when tied Schmidt coefficients make
    the biorthogonal expansion non-unique.
    """

    coefficients: np.ndarray
    partners: np.ndarray
    partners_orthogonal: bool
    max_partner_overlap: float
    unique: bool


def rebasis(psi: hb.PureState, bipartition, new_basis,
            tol: float = ORTHO_TOL, tie_tol: float = 1e-8) -> RebasisResult:
    """Rewrite a bipartite state over an arbitrary orthonormal basis of side 1."""
    left, right = set(bipartition[0]), set(bipartition[1])
    labels = set(psi.layout.labels)
    if left & right or (left | right) != labels or not left or not right:
        raise BadBipartition(f"({sorted(left)}, {sorted(right)}) does not partition {sorted(labels)}")
    lax = [i for i, (l, _) in enumerate(psi.layout.factors) if l in left]
    rax = [i for i, (l, _) in enumerate(psi.layout.factors) if l in right]
    dl = int(np.prod([psi.layout.dims[i] for i in lax], dtype=np.int64))
    m = psi.as_tensor().transpose(lax + rax).reshape(dl, -1)

    basis = _as_matrix(new_basis)
    if basis.shape != (dl, dl):
        raise InvalidBasis(f"need a complete basis of {dl} vectors of dimension {dl}")
    gram = basis @ basis.conj().T
    if np.max(np.abs(gram - np.eye(dl))) > tol:
        raise InvalidBasis(f"basis not orthonormal within {tol}")

    partners_raw = basis.conj() @ m          # row n = <s'_n| psi, a side-2 vector
    coeffs = np.linalg.norm(partners_raw, axis=1)
    partners = np.zeros_like(partners_raw)
    active = coeffs > 1e-15
    partners[active] = partners_raw[active] / coeffs[active, None]

    overlaps = partners[active] @ partners[active].conj().T
    np.fill_diagonal(overlaps, 0.0)
    max_overlap = float(np.max(np.abs(overlaps))) if overlaps.size else 0.0

    sv = np.linalg.svd(m, compute_uv=False)
    sv = sv[sv > 1e-12]
    unique = bool(np.all(np.abs(np.diff(sv)) > tie_tol)) if len(sv) > 1 else True

    return RebasisResult(coeffs, partners, max_overlap < max(tol, 1e-8),
                         max_overlap, unique)


# ---------------------------------------------------------------------------
# file loading
# ---------------------------------------------------------------------------

def load_setup(manifest_path) -> MeasurementSetup:
    """Build a setup from a YAML manifest listing basis-vector files.

    Keys: ``system_basis`` and ``pointer_states`` (lists of state files in
    the labeled textual format), ``ready_state`` (one file), and optionally
    ``environment_ready`` plus ``environment_records``.  File paths are
    resolved relative to the manifest.
    """
    manifest_path = str(manifest_path)
    with open(manifest_path) as fh:
        spec = yaml.safe_load(fh)
    import os
    base = os.path.dirname(os.path.abspath(manifest_path))

    def vec(name):
        return hb.load_state(os.path.join(base, name)).amplitudes

    kwargs = dict(
        system_basis=[vec(f) for f in spec["system_basis"]],
        ready_state=vec(spec["ready_state"]),
        pointer_states=[vec(f) for f in spec["pointer_states"]],
    )
    if "environment_records" in spec:
        kwargs["environment_ready"] = vec(spec["environment_ready"])
        kwargs["environment_records"] = [vec(f) for f in spec["environment_records"]]
    for key in ("system_label", "apparatus_label", "environment_label"):
        if key in spec:
            kwargs[key] = spec[key]
    return MeasurementSetup(**kwargs)
