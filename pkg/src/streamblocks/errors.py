"""Exception types shared across the package.

Two failure categories surface at the CLI boundary: problems with the
inputs (files, flags, malformed or inconsistent data) and numeric
breakdowns during computation (non-finite state, non-stationary models).
They map to distinct process exit codes.
"""


class StreamBlocksError(Exception):
    """Base class for all package errors."""


class InputError(StreamBlocksError, ValueError):
    """Invalid input data or configuration (CLI exit code 2)."""


class NumericError(StreamBlocksError, ArithmeticError):
    """Numeric failure during computation (CLI exit code 3)."""
