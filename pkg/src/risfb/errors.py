"""Exception types raised across the package."""


class RisfbError(Exception):
    """Base class for all package errors."""


class DimensionError(RisfbError, ValueError):
    """Array shapes or lengths do not conform."""


class DomainError(RisfbError, ValueError):
    """An argument lies outside its admissible range."""


class StateError(RisfbError, RuntimeError):
    """An operation was called in the wrong state (e.g. backward before forward)."""


class ProtocolError(RisfbError, RuntimeError):
    """The feedback state machines were driven out of order."""


class DecodeError(RisfbError, ValueError):
    """A serialized frame or file could not be parsed."""


class FormatVersionError(DecodeError):
    """A file was written with an unsupported format version."""


class TrainingError(RisfbError, RuntimeError):
    """Training diverged."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ConfigError(RisfbError, ValueError):
    """An experiment configuration is inconsistent or unreadable."""
