"""Exception hierarchy for photon-trajectories."""

from typing import Optional


class PhotonTrajectoryError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ValidationError(PhotonTrajectoryError, ValueError):
    """Input rejected before any computation started."""

    exit_code = 2


class InvalidArgumentError(ValidationError):
    """Argument outside its admissible range."""
    pass


class ConfigurationError(ValidationError):
    """Run configuration does not match the schema."""

    def __init__(self, message: str, diagnostics: Optional[list] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class NumericalError(PhotonTrajectoryError):
    """Computation finished but produced an unusable result."""

    exit_code = 3

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class NormalizationError(NumericalError):
    """Photon profile is not normalized to one excitation."""
    pass


class UndefinedStateError(NumericalError):
    """A normalized state was requested from a zero-weight branch."""
    pass


class ModelInconsistencyError(NumericalError):
    """Jump intensity came out strongly negative."""
    pass


class ForbiddenJumpError(NumericalError):
    """Jump applied where the intensity vanishes."""
    pass


class StepSizeError(NumericalError):
    """Time step too large for the first-order update."""
    pass


class AccuracyError(NumericalError):
    """Integrator trace drift exceeded its limit."""
    pass


class UnsupportedCountError(NumericalError, NotImplementedError):
    """Count number beyond what the propagator formulas cover."""
    pass


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to a CLI exit status."""
    if isinstance(exc, PhotonTrajectoryError):
        return exc.exit_code
    return 1
