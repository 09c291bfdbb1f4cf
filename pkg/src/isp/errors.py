"""Exception hierarchy shared by all modules."""


class ISPError(Exception):
    """Base class for all errors raised by the package."""


class InvalidArgumentError(ISPError, ValueError):
    pass


class CoefficientBoundError(ISPError, ValueError):
    """A coefficient left its admissible range (eta, kappa must stay positive)."""


class InvalidMatrixError(ISPError, ValueError):
    pass


class ConvergenceError(ISPError, RuntimeError):
    """Iterative solver stopped at the iteration cap.

    Attributes
    ----------
    residual : float
        Last relative residual ``||b - A x|| / ||b||``.
    iterations : int
    step : int or None
        Time step index, filled in by the time-stepping drivers.
    """

    def __init__(self, message, residual, iterations, step=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.step = step


class DegenerateProfileError(ISPError, ValueError):
    """The integral of the source profile is (numerically) zero."""


class FitError(ISPError, RuntimeError):
    pass


class ConfigError(ISPError, ValueError):
    pass
