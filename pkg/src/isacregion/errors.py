"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested function."""


class AccuracyError(ArithmeticError):
    """A numerical procedure could not reach its requested tolerance.

    The best available estimate and its error bound are kept so callers can
    decide whether the result is still usable.
    """

    def __init__(self, message: str, estimate: float = float("nan"), error: float = float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class ConvergenceError(AccuracyError):
    """Raised when an entropy integral fails to converge."""


class UnsupportedDistributionError(DomainError):
    """The input distribution has no known transmitted-power law."""


class DegenerateInputError(DomainError):
    """All channel inputs are zero, so the detection statistic is undefined."""
