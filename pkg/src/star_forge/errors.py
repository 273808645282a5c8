"""Exception types raised by star_forge."""


class StarForgeError(Exception):
    """Base class for domain errors (CLI exit status 1)."""


class DimensionMismatch(StarForgeError, ValueError):
    pass


class TruncationMismatch(StarForgeError, ValueError):
    pass


class FrameError(StarForgeError, ValueError):
    pass


class ShapeError(StarForgeError):
    """A result failed a structural check that valid input can never trigger."""


class InvalidExponent(StarForgeError, ValueError):
    pass


class CCRViolation(StarForgeError):
    def __init__(self, message, degree=None, defect=None):
        super().__init__(message)
        self.degree = degree
        self.defect = defect


class SingularityError(StarForgeError):
    def __init__(self, message, t_critical=None):
        super().__init__(message)
        self.t_critical = t_critical


class NotSymplectic(StarForgeError, ValueError):
    pass


class Unsupported(StarForgeError):
    pass


class StagnationError(StarForgeError):
    def __init__(self, message, degree=None):
        super().__init__(message)
        self.degree = degree


class FlatnessError(StarForgeError):
    pass


class ParseError(Exception):
    """Syntax or name error in an expression (CLI exit status 2)."""

    def __init__(self, message, line=1, column=1):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column
