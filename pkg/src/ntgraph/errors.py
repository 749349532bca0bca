"""Exception types raised across the package."""


class NTError(Exception):
    """Base class for all package errors."""


class ParseError(NTError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class BoundsError(NTError, IndexError):
    pass


class IdError(NTError, ValueError):
    pass


class ShapeError(NTError, ValueError):
    pass


class StateError(NTError, RuntimeError):
    pass


class DegeneracyError(NTError, FloatingPointError):
    """Training produced non-finite values."""
