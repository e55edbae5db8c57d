"""Exception hierarchy.

Every error raised on purpose derives from ``CliferError`` so callers (and the
CLI exit-code mapping) can tell contract violations apart from bugs.
"""


class CliferError(Exception):
    """Base class for all library errors."""


class InputError(CliferError, ValueError):
    """Bad argument: wrong dimension, empty input, out-of-range value."""


class DimensionError(InputError):
    pass


class ConfigError(InputError):
    pass


class StateError(CliferError, RuntimeError):
    """Operation not valid in the object's current state."""


class UnlabeledNetworkError(StateError):
    pass


class ProtocolError(CliferError, ValueError):
    """Learning protocol violated (mixed-label episode, unknown class...)."""


class DegenerateDataError(InputError):
    """Statistic undefined for the data (e.g. all values tied)."""


class DataError(CliferError, ValueError):
    """Problem with an external dataset. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ParseError(DataError):
    pass


class SchemaError(DataError):
    pass


class LabelError(DataError):
    pass


class SplitError(DataError):
    pass


class FitError(DataError):
    pass


class GenerationError(CliferError, ValueError):
    pass


class TrainingError(CliferError, RuntimeError):
    pass
