"""Exception types shared across the toolkit."""


class EmbedFuseError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(EmbedFuseError):
    """Invalid configuration or parameter values (a caller mistake)."""


class DataError(EmbedFuseError):
    """Invalid data content: dimension mismatch, zero norms, NaN/Inf, duplicate ids."""


class FormatError(DataError):
    """Malformed binary container (bad magic, version, or byte count)."""
