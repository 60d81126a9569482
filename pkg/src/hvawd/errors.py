"""Exception types shared across the package."""


class ProtocolError(RuntimeError):
    """Predict/commit sequencing was violated (double predict, stale commit)."""


class NumericError(RuntimeError):
    """A computation produced non-finite values or an impossible quadratic form."""


class ParseError(ValueError):
    """A stream file row failed to parse; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SchemaError(ValueError):
    """A stream file violated its declared schema (e.g. inconsistent dimension)."""


class ConfigError(ValueError):
    """A run configuration failed validation."""
