"""Exception types shared across the package.

The CLI maps each class to a distinct exit code, so keep the taxonomy flat
and stable.
"""


class PorcrsError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(PorcrsError):
    """An argument violates a precondition (bad size, count, or range)."""


class FieldMismatchError(PorcrsError):
    """A value is not a canonical element of the expected field."""


class CapacityError(PorcrsError):
    """A code or append would exceed the field order."""


class UnrecoverableError(PorcrsError):
    """Fewer surviving symbols than the code rank; erasure decode impossible."""


class FormatError(PorcrsError):
    """A persisted artifact is malformed (bad magic, truncation, bad shape)."""


class MetaFormatError(FormatError):
    """Metadata text could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OrderRejectedError(PorcrsError):
    """A server refused an append order (wrong sequence number or shape)."""
