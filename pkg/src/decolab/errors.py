"""Exception types shared across the package."""


class DecolabError(Exception):
    """Base class for all package-specific errors."""


class LabelCollision(DecolabError):
    """Two tensor factors carry the same label."""


class LabelNotFound(DecolabError):
    """A requested factor label is absent from the layout."""


class LayoutMismatch(DecolabError):
    """Operands live on different tensor-product layouts."""


class BadBipartition(DecolabError):
    """The given label sets do not partition the layout."""


class InvalidSetup(DecolabError):
    """A measurement setup violates its orthonormality/count contract."""


class InvalidBasis(DecolabError):
    """A supplied basis is not orthonormal."""


class NotHomogeneous(DecolabError):
    """Operation requires identical couplings/initial amplitudes per spin."""


class SizeGuard(DecolabError):
    """Problem size exceeds the dense desk-scale guard."""


class InvalidProjector(DecolabError):
    """Operator is not a Hermitian idempotent within tolerance."""


class IncompleteFamily(DecolabError):
    """Projector family does not resolve the identity."""


class DegenerateSpec(DecolabError):
    """Both Hamiltonian norms vanish; no regime can be assigned."""


class NotEqualAmplitude(DecolabError):
    """Derivation requires equal-magnitude Schmidt coefficients."""


class ArityError(DecolabError):
    """Operation defined only for two-term Schmidt states."""


class GridMismatch(DecolabError):
    """History families or propagators disagree on the time grid."""


class NotFound(DecolabError):
    """Requested history is not part of the functional."""


class BadGrouping(DecolabError):
    """Coarse-graining groups are not valid index subsets."""


class NumericalUnderflow(DecolabError):
    """A renormalization step hit an all-zero vector."""


class StepRejected(DecolabError):
    """Integrator step violated its stability bound."""


class NodeProximity(DecolabError):
    """Guiding field evaluated too close to a wavefunction node."""


class ConfigError(DecolabError):
    """Scenario configuration failed validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))
