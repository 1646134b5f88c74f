"""Exception hierarchy shared across the package."""


class LmrjError(Exception):
    """Base class for package errors."""


class DataError(LmrjError):
    """Malformed or inconsistent input data (user-fixable)."""


class ConfigError(LmrjError):
    """Invalid run configuration (user-fixable)."""


class ModelError(LmrjError):
    """Invalid parameter values or incompatible model structure."""


class TraceError(LmrjError):
    """Corrupt, truncated, or incompatible trace file."""
