"""Exception types shared across the package."""


class FracqvError(Exception):
    """Base class for all package errors."""


class DomainError(FracqvError, ValueError):
    """An argument lies outside the domain of the operation."""


class ModelError(FracqvError):
    """A covariance model or grid violates its invariants."""


class NumericalError(FracqvError, ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    The achieved error estimate is kept on ``estimate`` when available.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class RegimeError(FracqvError):
    """The model is outside the regime an operation assumes."""


class InvalidSampleError(FracqvError, ValueError):
    """Sample statistics make an estimator undefined (e.g. V_n <= 0)."""
