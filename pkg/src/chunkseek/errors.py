"""Exception types shared across the package."""


class ChunkSeekError(Exception):
    """Base class for all package errors."""


class ValidationError(ChunkSeekError, ValueError):
    """An input violates a structural or configuration contract."""


class DecodeError(ChunkSeekError, ValueError):
    """A binary or annotation file failed to parse or verify."""


class NumericError(ChunkSeekError, ArithmeticError):
    """A computation produced NaN/Inf or an otherwise unusable result."""


class UsageError(ChunkSeekError):
    """Bad command-line invocation (reserved for the CLI layer)."""
