"""Exception hierarchy shared across the package."""


class SamError(Exception):
    """Base class for all samdetect errors."""


class DataError(SamError):
    """Raised for problems with input data: bad CSV cells, missing files,
    dimension or feature-name mismatches."""


class ModelFormatError(SamError):
    """Raised when a persisted model file is malformed, has an unknown
    format version, or violates a model invariant."""


class ConfigError(SamError):
    """Raised for invalid configuration values (generator, RANSAC, bench)."""
