"""Shared exception hierarchy.

Every error raised by this package derives from :class:`NarravoError`, so
callers (CLI, HTTP service) can catch one base type and still report the
specific failure stage.
"""

from __future__ import annotations


class NarravoError(Exception):
    """Base class for all package errors."""


class ParseError(NarravoError):
    """A document could not be parsed; carries a line/field path when known."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ValidationError(NarravoError):
    """Structurally parseable input that violates a domain invariant."""


class DegenerateInputError(NarravoError):
    """Numerically meaningless input (zero variance, empty sample, ...)."""
