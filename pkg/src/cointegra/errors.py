"""Exception hierarchy shared by all cointegra modules."""


class CointegraError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CointegraError, ValueError):
    """Argument outside the half-plane where a transform is defined."""


class GridError(CointegraError, ValueError):
    """Requested time is incompatible with a sampling grid."""


class SingularError(CointegraError, ArithmeticError):
    """A matrix that must be inverted is numerically singular."""


class ScanResolutionError(CointegraError):
    """The argument-principle contour scan did not stabilise."""


class DivergenceError(CointegraError, ArithmeticError):
    """A limit that should exist failed the Cauchy criterion."""


class InstabilityError(CointegraError, ArithmeticError):
    """A kernel solve blew up."""


class PreconditionError(CointegraError, ValueError):
    """An operation was called on a model class it does not support."""


class CholeskyError(CointegraError, ValueError):
    """A covariance matrix is not positive semi-definite."""


class WindowError(CointegraError, ValueError):
    """Not enough simulated history to evaluate a quantity."""


class XiError(CointegraError, ValueError):
    """The initial value does not lie in the null space of the level matrix."""


class ConditionError(CointegraError, ValueError):
    """A polynomial model violates a required zero-location condition."""


class VerificationError(CointegraError, ArithmeticError):
    """An internal identity check failed after construction."""


class RootError(CointegraError, ValueError):
    """A VAR characteristic root lies in a forbidden region."""


class LagError(CointegraError, ValueError):
    """The lag cap does not cover the delay measure's support."""


class ConfigError(CointegraError, ValueError):
    """Invalid run configuration."""
