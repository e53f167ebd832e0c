"""Exception hierarchy shared across the package."""


class FrccError(Exception):
    """Base class for all package errors."""


class ValidationError(FrccError):
    """Bad configuration or malformed input detected before computation."""


class IngestError(ValidationError):
    """Raw data could not be parsed; message carries file/line context."""


class ComputationError(FrccError):
    """A fitting or monitoring stage failed on valid-looking input."""
