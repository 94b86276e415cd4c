"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions do not match the expected layout."""


class ValidationError(ValueError):
    """An argument violates a documented precondition."""


class StateError(RuntimeError):
    """An operation was applied to state that cannot accept it."""


class ConfigError(ValueError):
    """A configuration file or value is invalid."""


class FormatError(ValueError):
    """A file does not follow the expected binary layout."""


class CorruptionError(ValueError):
    """A file fails its integrity check."""


class PipelineError(RuntimeError):
    """Training aborted; the message names the last usable checkpoint."""
