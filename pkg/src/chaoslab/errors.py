"""Exception hierarchy shared by all modules."""


class ChaosLabError(Exception):
    """Base class for every error raised by the package."""


class InvalidInputError(ChaosLabError, ValueError):
    """Malformed arguments (empty arrays, NaN entries, bad shapes)."""


class DomainError(ChaosLabError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class OutOfModelError(DomainError):
    """Homogeneity exponent outside the square-summable family."""


class DegenerateWindowError(DomainError):
    """Lag window too small to hold k distinct lags."""


class DivergenceError(ChaosLabError, ArithmeticError):
    """A series required to be finite diverges."""


class ResourceError(ChaosLabError):
    """Estimated work or memory exceeds the configured budget."""

    def __init__(self, message, estimate=None, budget=None):
        super().__init__(message)
        self.estimate = estimate
        self.budget = budget


class AccuracyError(ChaosLabError):
    """Numerical refinement did not reach the requested tolerance."""

    def __init__(self, message, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class IncompleteInputError(ChaosLabError, KeyError):
    """An input map lacks a value the computation needs."""

    def __init__(self, index):
        super().__init__(index)
        self.index = index

    def __str__(self):
        return f"no value supplied for index {self.index!r}"


class UnsupportedKernelError(ChaosLabError, TypeError):
    """The requested algorithm does not apply to this kernel."""


class DegenerateSampleError(ChaosLabError, ValueError):
    """Sample has zero spread, so shape statistics are undefined."""


class InsufficientDataError(ChaosLabError, ValueError):
    """Too few grid points or samples for the requested summary."""


class InvalidComparisonError(ChaosLabError, ValueError):
    """Samples cannot be compared (e.g. unequal sizes)."""


class ConfigError(ChaosLabError, ValueError):
    """Invalid experiment configuration."""
