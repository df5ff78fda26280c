"""Exception types shared across the package."""


class CVQKDError(Exception):
    """Base class for numerical / physical failures in the pipeline."""


class UnphysicalStateError(CVQKDError):
    """A covariance matrix violates the uncertainty bound Gamma + i*Omega >= 0."""


class SpectrumError(CVQKDError):
    """Symplectic eigenvalue extraction failed (solver or +/- pairing)."""


class DummySolveError(CVQKDError):
    """The trusted-noise parameter redefinition has no acceptable solution."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoSolutionError(DummySolveError):
    """The defining equations cannot be satisfied by real parameters."""


class UnphysicalEnvironmentError(DummySolveError):
    """A solution exists but requires an environment EPR variance below vacuum."""


class EstimationError(CVQKDError):
    """A channel estimator cannot produce a meaningful value from the data."""


class CalibrationError(EstimationError):
    """A required calibration record set is missing or unusable."""
