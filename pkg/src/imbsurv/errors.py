class ImbsurvError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(ImbsurvError, ValueError):
    """Invalid run configuration. ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class SchemaError(ConfigError):
    """Declared columns do not match the data."""


class ParseError(ImbsurvError, ValueError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class DegenerateError(ImbsurvError, ValueError):
    """Input has too little variation for the requested statistic or fit."""
