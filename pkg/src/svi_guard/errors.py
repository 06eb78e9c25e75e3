"""Exception hierarchy shared by all modules."""


class SviGuardError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SviGuardError, ValueError):
    """An input lies outside the domain of an operation."""


class InvalidParamsError(DomainError):
    """A parameter set violates one of its construction invariants."""


class NoSolutionError(DomainError):
    """An implied volatility does not exist for the given price."""


class BelowIntrinsicError(NoSolutionError):
    pass


class AboveForwardError(NoSolutionError):
    pass


class CalibrationError(SviGuardError):
    pass


class SmileFileError(SviGuardError, ValueError):
    """Malformed smile CSV input; the message names the offending line."""
