"""Exception hierarchy.

Two families map onto the CLI exit codes: ``ValidationError`` (bad input,
exit 1) and ``NumericalError`` (a computation that cannot proceed, exit 2).
"""


class SentipriceError(Exception):
    """Base class for all package errors."""


class ValidationError(SentipriceError, ValueError):
    """Input data or parameters violate a documented precondition."""


class NumericalError(SentipriceError, ArithmeticError):
    """A numerical routine hit a degenerate configuration."""


class DegenerateDenominatorError(NumericalError):
    """A closed-form moment divides by a quantity that is (numerically) zero."""


class InvalidMomentsError(NumericalError):
    """Moments that no lognormal law can match (m1 <= 0 or m2 < m1**2)."""


class MisalignedGridError(ValidationError):
    """A delay or observation step is not an integer multiple of the data step."""


class InsufficientDataError(ValidationError):
    """Not enough observations for the requested operation."""


class DomainError(ValidationError):
    """Argument outside the domain of a density or kernel."""


class SingularRegressionError(NumericalError):
    """Regression design is rank deficient or has zero residual variance."""


class DataFormatError(ValidationError):
    """Malformed input file; the message carries the offending line."""
