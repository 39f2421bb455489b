"""Exception types raised by the library."""


class TelecomError(Exception):
    """Base class for library errors."""


class DomainError(TelecomError, ValueError):
    """A parameter lies outside the domain where a quantity is defined."""


class CriticalCaseError(DomainError):
    """Session-count problem sits on the critical boundary zeta = 1."""


class IntegrationError(TelecomError, ArithmeticError):
    """Adaptive quadrature failed to reach its error target."""


class InversionError(TelecomError, ArithmeticError):
    """A numeric inversion (CDF or characteristic function) failed."""


class ResourceError(TelecomError, RuntimeError):
    """A simulation would exceed its configured event budget."""


class ExponentCapError(TelecomError, OverflowError):
    """An exponential moment exponent exceeds the configured cap."""


class ConfigurationError(TelecomError, ValueError):
    """An experiment or estimator configuration is invalid."""


class RegimeWarning(UserWarning):
    """Parameters lie outside the regime an experiment or limit result targets."""


class NonFiniteResultError(TelecomError, ArithmeticError):
    """An output cell came out NaN or infinite."""


class ResultsParseError(TelecomError, ValueError):
    """A results file is missing or malformed."""
