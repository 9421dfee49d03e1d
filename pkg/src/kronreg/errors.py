"""Exception hierarchy shared by all kronreg modules."""


class KronregError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(KronregError, ValueError):
    """Operand shapes are incompatible or below a required minimum."""


class CapacityError(KronregError, ValueError):
    """Requested size exceeds what the operands can support."""


class SingularMatrixError(KronregError, ArithmeticError):
    """A matrix that must be invertible is numerically singular."""


class RankError(KronregError, ArithmeticError):
    """A least-squares matrix is column rank deficient."""


class DomainError(KronregError, ValueError):
    """A scalar argument lies outside its admissible range."""


class PreconditionError(KronregError, ValueError):
    """An input violates a documented precondition."""


class DegenerateInputError(KronregError, ValueError):
    """Input is zero or otherwise trivial where that is not allowed."""


class TargetUnreachableError(KronregError):
    """The discrepancy target lies below the attainable residual.

    Raised by :func:`kronreg.tikhonov.find_mu` when even the smallest
    admissible regularization parameter leaves a residual above the target;
    the caller has to enlarge the Krylov subspace.
    """

    def __init__(self, message, residual_floor):
        super().__init__(message)
        self.residual_floor = residual_floor


class ConfigError(KronregError, ValueError):
    """An experiment configuration is invalid."""
