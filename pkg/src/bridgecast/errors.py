"""Exception hierarchy shared by every module.

The CLI maps these onto process exit codes, so library code raises the most
specific class that applies instead of bare ``ValueError``.
"""


class BridgecastError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InvalidArgument(BridgecastError, ValueError):
    exit_code = 1


class DataError(BridgecastError, ValueError):
    """Malformed, missing or inconsistent input data."""

    exit_code = 2


class NumericError(BridgecastError, ArithmeticError):
    """A computation produced (or would produce) a non-finite or complex value."""

    exit_code = 3


class NumericDomainError(NumericError):
    """Negative radicand beyond tolerance in a coefficient solve."""


class DegenerateStep(NumericError):
    """Step with zero forward noise scale; the general solver is undefined there."""


class InvalidState(BridgecastError, RuntimeError):
    exit_code = 1


class VerificationFailure(BridgecastError):
    exit_code = 4
