"""Exception and warning types shared across the package."""


class QLBEError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(QLBEError, ValueError):
    """Invalid parameters, grid, time step or config file."""


class DomainError(QLBEError, ValueError):
    """Argument outside the domain of a kernel (e.g. zero momentum transfer)."""


class PreconditionError(QLBEError, ValueError):
    """A documented precondition of an operation is violated."""


class NumericAccuracyError(QLBEError, ArithmeticError):
    """A quadrature or integrator could not reach its tolerance."""


class SamplingError(QLBEError, RuntimeError):
    """Rejection sampling exceeded its iteration cap."""


class DomainTooSmallError(QLBEError, RuntimeError):
    """Probability leaked to the edge of a truncated phase-space domain."""


class DiffusiveLimitWarning(UserWarning):
    """The mass ratio is too large for the diffusive-limit formulas to be trusted."""
