"""Exception types shared across the toolkit."""


class BlmError(Exception):
    """Base class for all toolkit errors."""


class EmptyInputError(BlmError):
    """Raised when an operation receives no usable values."""


class UndefinedCorrelationError(BlmError):
    """Raised when a correlation is requested for zero-variance data."""


class NpyFormatError(BlmError):
    """Raised for malformed or unsupported NPY containers."""


class ManifestError(BlmError):
    """Raised for schema violations in a model manifest."""


class IngestError(BlmError):
    """Raised when a tensor listed in a manifest cannot be loaded."""


class MonitorStoppedError(BlmError):
    """Raised when a stop monitor is fed values after it stopped."""


class IllConditionedError(BlmError):
    """Raised when a kernel matrix cannot be factorized even with jitter."""
