"""Exception types shared across the package."""

from __future__ import annotations


class ParseError(ValueError):
    """A file could not be decoded (malformed JSON, bad JSONL line, ...)."""


class ValidationError(ValueError):
    """A decoded value violates a schema invariant.

    ``field`` names the offending field (dotted path into the document when
    the value came from a file).
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class GatewayError(RuntimeError):
    """The model gateway failed after exhausting retries."""

    def __init__(self, message: str, attempts: list[str] | None = None):
        super().__init__(message)
        self.attempts = attempts or []
