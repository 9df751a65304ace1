"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid user-supplied data or configuration."""


class ConvergenceError(RuntimeError):
    """An iterative fit failed to converge.

    Carries the last iterate so callers can inspect or reuse it.
    """

    def __init__(self, message, beta=None, iterations=None):
        super().__init__(message)
        self.beta = beta
        self.iterations = iterations


class NumericalError(RuntimeError):
    """A solver produced a non-finite objective."""


class RankDeficiencyError(RuntimeError):
    """The working matrix is singular for the requested support."""


class EnumerationBudgetError(RuntimeError):
    """Subset enumeration would exceed the configured model budget."""


class UnsupportedFamilyError(ValueError):
    """The requested operation is not defined for this GLM family."""
