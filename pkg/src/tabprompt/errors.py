"""Exception types shared across the package.

The CLI maps `ValidationError` to exit code 2 and every other failure to
exit code 1, so raising the right class here is part of the contract.
"""

from __future__ import annotations


class TabpromptError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(TabpromptError):
    """A config value, schema declaration, or call precondition is invalid."""


class PredictionError(TabpromptError):
    """A prediction backend failed to produce a usable score.

    `reason` is a short machine-readable tag (for example "timeout",
    "bad_response", "missing_credential", "http_error") and `row_index`
    identifies the offending prompt's source row when known.
    """

    def __init__(
        self,
        message: str,
        *,
        reason: str | None = None,
        row_index: int | None = None,
    ) -> None:
        self.reason = reason
        self.row_index = row_index
        if row_index is not None:
            message = f"row {row_index}: {message}"
        super().__init__(message)
