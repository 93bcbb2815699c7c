"""Exception hierarchy.

CLI exit codes hang off the class: ``ParseError`` -> 2, ``ConfigError`` -> 3,
``InsufficientDataError`` -> 4, anything else derived from ``IsoTrajError`` -> 1.
"""


class IsoTrajError(Exception):
    exit_code = 1


class ParseError(IsoTrajError, ValueError):
    exit_code = 2

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyInputError(ParseError):
    pass


class ConfigError(IsoTrajError, ValueError):
    exit_code = 3


class InsufficientDataError(IsoTrajError, ValueError):
    exit_code = 4


class ShapeError(IsoTrajError, ValueError):
    pass


class SequencingError(IsoTrajError, ValueError):
    pass


class DegenerateIntervalError(IsoTrajError, ValueError):
    pass


class DegenerateDistributionError(IsoTrajError, ValueError):
    pass


class InvalidIntervalError(IsoTrajError, ValueError):
    pass


class IndeterminateHeadingError(IsoTrajError, ValueError):
    pass


class OutOfDomainError(IsoTrajError, ValueError):
    pass


class NotFoundError(IsoTrajError, KeyError):
    pass


class DuplicateIngestionError(IsoTrajError):
    pass


class IncompleteStateError(IsoTrajError, ValueError):
    def __init__(self, field):
        self.field = field
        super().__init__(f"incomplete state: missing {field!r}")


class TickError(IsoTrajError):
    """Wraps a pipeline failure with the tick at which it happened."""

    def __init__(self, tick, cause):
        self.tick = tick
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"tick {tick}: {cause}")
