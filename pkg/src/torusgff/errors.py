"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """Invalid run configuration (bad flag value, unknown config key, ...)."""


class SchemaError(ValueError):
    """Persisted artifact with a missing or unsupported schema version."""
