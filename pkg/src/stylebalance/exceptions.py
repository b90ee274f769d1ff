"""Exception types shared across the package."""


class StyleBalanceError(Exception):
    """Base class for every error raised by this library."""


class DimensionError(StyleBalanceError):
    """Operands have incompatible shapes, sizes, or channel counts."""


class PreconditionError(StyleBalanceError):
    """An input violates a documented requirement of the operation."""


class ConfigError(StyleBalanceError):
    """A network or run configuration is internally inconsistent."""


class DataError(StyleBalanceError):
    """A file or table failed to parse or validate."""
