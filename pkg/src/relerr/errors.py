"""Exception and warning types raised across the package."""


class RelErrError(Exception):
    """Base class for package errors."""


class DomainError(RelErrError, ValueError):
    """An argument lies outside the domain of the function."""


class NonFinite(RelErrError, ArithmeticError):
    """A NaN or infinite value appeared where a finite one is required."""


class NonConvergent(RelErrError, ArithmeticError):
    """An iterative routine exhausted its budget before meeting tolerance."""


QuadratureError = NonConvergent


class LogOverflow(RelErrError, OverflowError):
    """A linear predictor left the representable log-domain range."""


class DimensionMismatch(RelErrError, ValueError):
    pass


class InnerSolverFailure(RelErrError, ArithmeticError):
    """Damped Newton on a surrogate could not reach its gradient tolerance."""

    def __init__(self, message, beta=None):
        super().__init__(message)
        self.beta = beta


class UnsupportedFamily(RelErrError, ValueError):
    pass


class DataError(RelErrError, ValueError):
    """Input data violate a model precondition (e.g. nonpositive response)."""


class SchemaError(RelErrError, KeyError):
    """A named column or key is missing or inconsistent."""

    def __init__(self, column, message=None):
        super().__init__(column, message or f"missing column {column!r}")
        self.column = column

    def __str__(self):
        return str(self.args[1])


class FileError(RelErrError, OSError):
    pass


class InsufficientData(RelErrError, ValueError):
    pass


class ScenarioError(RelErrError, ValueError):
    pass


class DegenerateWeights(UserWarning):
    """Nearly all weight concentrated on a single observation."""


class SingularJ(UserWarning):
    """The sensitivity matrix is numerically singular; eigenvalues were floored."""


class ConvergenceWarning(UserWarning):
    pass
