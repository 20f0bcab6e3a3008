"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration values."""


class DataError(ValueError):
    """Malformed, inconsistent, or out-of-range input data."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite value."""
