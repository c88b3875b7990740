"""Exception types raised across the package."""


class DfrcError(Exception):
    """Base class for all package errors."""


class InvalidInputError(DfrcError, ValueError):
    """Input array or parameter violates a precondition."""


class InvalidAngleError(InvalidInputError):
    """Angle outside [-90, 90] degrees."""


class NotPositiveDefiniteError(DfrcError, ValueError):
    """Matrix expected to be positive definite is not.

    Attributes
    ----------
    min_eigenvalue : float
        Smallest eigenvalue of the offending matrix.
    """

    def __init__(self, min_eigenvalue, message=None):
        self.min_eigenvalue = float(min_eigenvalue)
        if message is None:
            message = (f"matrix is not positive definite: smallest eigenvalue "
                       f"{self.min_eigenvalue:.3e}")
        super().__init__(message)


class NumericalConsistencyError(DfrcError, ArithmeticError):
    """A quantity that must be non-negative or PSD came out otherwise."""


class IllConditionedWeightError(DfrcError, ArithmeticError):
    """MMSE error matrix too close to singular to invert."""


class ConfigError(DfrcError, ValueError):
    """Invalid system or experiment configuration."""
