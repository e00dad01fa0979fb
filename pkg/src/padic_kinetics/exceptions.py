"""Exception hierarchy shared by the library and the CLI."""


class PadicKineticsError(Exception):
    """Base class for all library errors."""


class UsageError(PadicKineticsError, ValueError):
    """Invalid arguments: mismatched basins, insufficient depth, bad ranges."""


class ConfigError(UsageError):
    """A scenario configuration failed validation."""


class NumericalError(PadicKineticsError, RuntimeError):
    """A numerical routine could not meet its contract."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge within the refinement budget."""

    def __init__(self, message, interval=None, error_estimate=None, tolerance=None):
        super().__init__(message)
        self.interval = interval
        self.error_estimate = error_estimate
        self.tolerance = tolerance


class StepRejected(NumericalError):
    """An explicit integrator step produced negative probabilities."""


class ThinningBoundError(NumericalError):
    """The thinning rate bound was exceeded during sampling."""


class ToleranceBreach(NumericalError):
    """A verification run exceeded one of its tolerances."""
