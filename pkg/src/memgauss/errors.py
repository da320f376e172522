"""Exception hierarchy.

The CLI maps :class:`ParseError` to exit code 2 and every other
:class:`MemgaussError` to exit code 1.
"""


class MemgaussError(Exception):
    """Base class for all domain errors raised by this package."""


class ParseError(MemgaussError):
    """Malformed input text. ``line`` is 1-based, or None if not line-bound."""

    def __init__(self, message, line=None):
        self.line = line
        self.reason = message
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
