"""Exception hierarchy shared by every module of the package."""


class CVQKDError(Exception):
    """Base class for all package errors."""


class NonPhysicalState(CVQKDError):
    """A covariance matrix or density matrix violates the uncertainty principle."""


class AsymmetryError(CVQKDError):
    """Eve's two-TMSV construction has no real squeezing parameters."""


class DecompositionError(CVQKDError):
    """A symplectic factorization failed its reconstruction check."""


class TruncationError(CVQKDError):
    """The Fock truncation is too small for the requested state."""


class WeightError(CVQKDError):
    """Mixture weights are negative or do not sum to one."""


class DegenerateCorrelation(CVQKDError):
    """A bivariate Gaussian has |rho| too close to one."""


class GridTooCoarse(CVQKDError):
    """The discretization self-check against a closed form failed."""


class MemoryBudgetExceeded(CVQKDError):
    """A dense table would exceed the configured memory budget."""


class NoPositiveRate(CVQKDError):
    """The best key rate found is not positive.

    The best result is attached so callers can still report it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class CalibrationError(CVQKDError):
    """Shot-noise or dark-noise calibration constants are inconsistent."""


class InsufficientSamples(CVQKDError):
    """Too few samples for a stable estimate."""


class NeverSecure(CVQKDError):
    """No elevation in a sweep reaches the key-rate threshold."""
