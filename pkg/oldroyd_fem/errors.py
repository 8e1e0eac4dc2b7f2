"""
Exception hierarchy for oldroyd-fem
"""

from typing import Any, List, Optional


class OldroydError(Exception):
    """Base class for all errors raised by oldroyd-fem"""


class InvalidInputError(OldroydError, ValueError):
    """Input violates a documented precondition (non-finite values, bad sizes, ...)"""


class DomainError(OldroydError, ValueError):
    """A scalar function was evaluated outside its domain"""

    def __init__(self, message: str, value: Optional[float] = None):
        super().__init__(message)
        self.value = value


class SingularMapError(OldroydError):
    """An element reference map is degenerate"""

    def __init__(self, element: int, determinant: float):
        super().__init__(f"element {element} has a singular reference map (det = {determinant:.3e})")
        self.element = element
        self.determinant = determinant


class SingularMatrixError(OldroydError):
    """A sparse factorization broke down or failed its residual check"""

    def __init__(self, message: str, pivot: Optional[int] = None):
        super().__init__(message)
        self.pivot = pivot


class SpaceMismatchError(OldroydError, ValueError):
    """Fields or spaces that must agree (mesh, space tag, LBB pair) do not"""


class MeshFormatError(OldroydError):
    """A mesh text file does not follow the documented grammar"""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(OldroydError, ValueError):
    """A run configuration could not be parsed or validated"""

    def __init__(
        self,
        message: str,
        key: Optional[str] = None,
        line: Optional[int] = None,
        column: Optional[int] = None,
    ):
        location = ""
        if line is not None:
            location = f" (line {line}, column {column if column is not None else 0})"
        super().__init__(f"{message}{location}")
        self.key = key
        self.line = line
        self.column = column


class TimeGridError(OldroydError, ValueError):
    """A time partition violates dt_n <= C dt_{n-1}"""


class StepFailure(OldroydError):
    """The nonlinear step solver did not converge"""

    def __init__(
        self,
        message: str,
        last_iterate: Any = None,
        residual_history: Optional[List[float]] = None,
        step: Optional[int] = None,
    ):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual_history = list(residual_history or [])
        self.step = step
