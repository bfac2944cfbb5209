"""Exception hierarchy shared by all freesim modules."""


class FreeSimError(Exception):
    """Base class for every error raised by freesim."""


class NumericalError(FreeSimError):
    """A computation could not produce a valid number."""


class DomainError(NumericalError, ValueError):
    """Arguments fall outside the domain of a kinematic formula."""


class SingularityError(NumericalError, ZeroDivisionError):
    """A denominator vanished (or changed sign) in the radius relation."""


class StepFailure(NumericalError):
    """The adaptive integrator could not advance: step size underflow."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class NoConvergence(NumericalError):
    """An iterative solver hit its iteration limit."""


class DegenerateInput(NumericalError, ValueError):
    """Polynomial input is identically zero."""


class DegenerateData(NumericalError, ValueError):
    """Regression data carry no information about the slope."""


class ZeroDisplacement(NumericalError, ValueError):
    """A measured displacement is zero so stiffness cannot be backed out."""


class InsufficientPeaks(NumericalError, ValueError):
    """Too few positive peaks in a free-vibration trace."""


class NonDecaying(NumericalError, ValueError):
    """Peak amplitudes of a free-vibration trace grow instead of decay."""


class LengthMismatch(FreeSimError, ValueError):
    """Paired sequences have different lengths."""


class IncompressibilityViolated(FreeSimError, ValueError):
    """Principal stretches do not satisfy J = 1."""


class InvalidDuration(FreeSimError, ValueError):
    """A trajectory or schedule duration is not strictly positive."""


class ConfigError(FreeSimError):
    """Base class for configuration problems (CLI exit code 2)."""


class ParseError(ConfigError):
    """The configuration document is not valid JSON."""


class ValidationError(ConfigError, ValueError):
    """The configuration parsed but violates a field invariant."""

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)
