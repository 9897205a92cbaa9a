"""Exception hierarchy shared by the package and mapped to CLI exit codes."""


class CakcdError(Exception):
    """Base class for all package errors."""


class ParseError(CakcdError, ValueError):
    """Malformed LIBSVM input. Carries the 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(ParseError):
    """Well-formed tokens that violate the LIBSVM index rules."""


class LabelError(CakcdError, ValueError):
    pass


class NumericalError(CakcdError, ArithmeticError):
    pass


class ResourceError(CakcdError, MemoryError):
    """Raised when an oracle would materialize a matrix above its size cap."""


class DomainError(CakcdError, ValueError):
    pass
