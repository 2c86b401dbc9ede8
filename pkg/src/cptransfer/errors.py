"""Exception types raised across the package."""


class CPTransferError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(CPTransferError, ValueError):
    pass


class NotHermitian(CPTransferError, ValueError):
    pass


class ConvergenceFailure(CPTransferError, RuntimeError):
    pass


class InvalidProbabilityVector(CPTransferError, ValueError):
    pass


class NonlinearChannelUnsupported(CPTransferError, TypeError):
    pass


class NoFixedDensityFound(CPTransferError, RuntimeError):
    pass


class BudgetExceeded(CPTransferError, RuntimeError):
    pass


class ExactBudgetExceeded(BudgetExceeded):
    pass


class ProbabilityOnBoundary(CPTransferError, ValueError):
    pass


class NegativeArgument(CPTransferError, ValueError):
    pass


class InvalidPovm(CPTransferError, ValueError):
    pass


class BranchCountMismatch(CPTransferError, ValueError):
    pass


class NotPositiveDefinite(CPTransferError, ValueError):
    pass


class NonPositiveFunctionValue(CPTransferError, ValueError):
    pass


class InsufficientPoints(CPTransferError, ValueError):
    pass


class NonPositiveValues(CPTransferError, ValueError):
    pass


class NonUniqueFixedPoint(CPTransferError, RuntimeError):
    pass


class BarycenterMismatch(CPTransferError, ValueError):
    pass


class ChannelInvalid(CPTransferError, ValueError):
    pass


class ConfigInvalid(CPTransferError, ValueError):
    pass
