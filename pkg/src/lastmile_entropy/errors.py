"""Exception types shared across the package."""

from __future__ import annotations


class EntropyError(Exception):
    """Base class for all package errors."""


class DomainError(EntropyError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(EntropyError, ValueError):
    """The inputs violate an assumption the operation is stated under."""


class ClassificationError(EntropyError, ValueError):
    """A profile cannot be placed in an entropy quadrant."""


class ConfigError(EntropyError, ValueError):
    """Invalid run configuration (mode, seed, grid)."""


class FitError(EntropyError, ValueError):
    """A regression has no usable data or is degenerate."""


class ParseError(EntropyError, ValueError):
    """A document cannot be parsed at all."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ValidationError(EntropyError, ValueError):
    """A parsed document contains invalid records."""
