"""Exception hierarchy shared by all hyprel modules."""


class HyprelError(Exception):
    """Base class for every error raised by the library."""


class DomainError(HyprelError, ValueError):
    """Input outside the domain where an operation is defined."""


class EmptyTruncationError(DomainError):
    """The truncated region {r >= eps} is empty."""


class BudgetExceededError(HyprelError):
    """Adaptive quadrature could not meet its tolerance within the node budget.

    The best available estimate is kept on the exception.
    """

    def __init__(self, message, value=None, error_bound=None):
        super().__init__(message)
        self.value = value
        self.error_bound = error_bound


class IllConditionedFitError(HyprelError):
    """Least-squares design matrix is numerically rank deficient."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class IncomparableError(HyprelError):
    """Two hypersurfaces (or configurations) do not share an ideal boundary."""


class GeometryError(HyprelError):
    """A geometric precondition failed (e.g. surfaces not graphs over each other)."""


class StepRejectedError(HyprelError):
    """A time step violated the stability guard of the scheme."""

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class ConfigError(HyprelError, ValueError):
    """Invalid run configuration."""
