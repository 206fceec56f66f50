"""Exception hierarchy. The CLI maps these onto exit codes."""


class AltError(Exception):
    """Base class for every error raised by altsc."""

    exit_code = 1


class ValidationError(AltError, ValueError):
    exit_code = 2


class ParseError(ValidationError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class ModelFormatError(ValidationError):
    """Malformed, truncated, tampered or unsupported-version model file."""


class NumericalError(AltError, ArithmeticError):
    exit_code = 4

    def __init__(self, message, matrix=None):
        super().__init__(message)
        self.matrix = matrix
