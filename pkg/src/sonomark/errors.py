"""Exception types shared across the toolkit."""


class MediaIOError(OSError):
    """A media file could not be read or written."""


class InvalidInputError(ValueError):
    """An argument violates a shape, range, or length contract."""


class ConfigurationError(RuntimeError):
    """A run is misconfigured: missing checkpoint, insufficient data, bad stage order."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""
