"""Shared error types mapped onto CLI exit codes."""

__all__ = ["ValidationError", "BudgetExceeded"]


class ValidationError(ValueError):
    """Invalid user input or configuration (CLI exit code 2)."""


class BudgetExceeded(RuntimeError):
    """A compute or memory budget refuses the request (CLI exit code 3).

    Raised before any partial work is returned: refusals are explicit.
    """
