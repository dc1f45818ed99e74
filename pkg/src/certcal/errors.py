"""Exception types shared across the package."""


class CertcalError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CertcalError, ValueError):
    """Input violates an operation's preconditions."""


class NumericError(CertcalError, ArithmeticError):
    """A numerical routine failed (non-finite values, failed decomposition)."""


class ParseError(InvalidInputError):
    """A line of an input file could not be parsed.

    ``line`` is 1-based.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
