"""Exception hierarchy shared by every nrmhd module."""


class NrmhdError(Exception):
    """Base class for all package errors."""


class GridMismatch(NrmhdError, ValueError):
    """Array shape or grid does not match the configured grid."""


class PreconditionViolated(NrmhdError):
    """An operation's hypothesis does not hold for the given input."""


class StepRejected(NrmhdError):
    """The time step violates the advective CFL bound."""

    def __init__(self, message: str, time: float | None = None, cfl: float | None = None):
        super().__init__(message)
        self.time = time
        self.cfl = cfl


class NonFinite(NrmhdError):
    """NaN or Inf detected in the state or in a diagnostic."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class DegenerateDraft(NrmhdError):
    """A random initial-data draft had zero norm."""


class NonMonotoneTime(NrmhdError):
    """A ledger sample is older than the latest recorded one."""


class InsufficientData(NrmhdError):
    """Too few samples for a fit."""


class NonPositiveValues(NrmhdError):
    """A log-log fit met a zero or negative value."""


class RunTooShort(NrmhdError):
    """The run does not span enough of (1 + t) for a verdict."""


class ConfigError(NrmhdError):
    """Base for configuration problems (exit code 2)."""


class ParseError(ConfigError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(ConfigError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
