"""Shared exception types."""


class HumorkitError(Exception):
    """Base class for all toolkit errors."""


class DataError(HumorkitError):
    """Malformed or degenerate input data (bad record, empty document, ...)."""


class FormatError(DataError):
    """A file does not conform to its declared on-disk format."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
