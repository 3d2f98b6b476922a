"""Exception hierarchy shared by the library and the CLI.

Every error carries the process exit code the CLI maps it to:

    3  input error (bad expression, bad problem file, contract violation)
    2  numerical failure (evaluation domain errors, step underflow)
    1  hypothesis / verification failure detected
"""

from __future__ import annotations

from typing import Optional


class RectiflowError(Exception):
    """Base class for all rectiflow errors."""

    exit_code = 2


# -- input errors -------------------------------------------------------------


class InputError(RectiflowError):
    exit_code = 3


class ExpressionSyntaxError(InputError):
    """Malformed expression text. ``position`` is the 0-based character offset."""

    def __init__(self, message: str, position: int, source: str = ""):
        self.message = message
        self.position = position
        self.source = source
        where = f" at position {position}"
        if source:
            where += f" in {source!r}"
        super().__init__(f"{message}{where}")


class DimensionError(InputError):
    """A spatial variable index is out of range for the declared dimension."""


class InvalidInput(InputError):
    """A precondition of an operation failed (point outside the domain, bad window...)."""


class MissingInverse(InputError):
    """An operation needs inverse expressions that were not supplied."""


class ProblemFileError(InputError):
    """A problem file is missing, unreadable or fails validation."""


# -- numerical failures -------------------------------------------------------


class EvalError(RectiflowError):
    """Expression evaluation left the real domain (log of a non-positive, pole, overflow)."""

    exit_code = 2


class OutOfRange(RectiflowError):
    """A curve was sampled outside the time range it covers."""

    exit_code = 2


# -- hypothesis / verification failures ----------------------------------------


class TrajectoryError(RectiflowError):
    """A trajectory stopped before reaching its requested time."""

    exit_code = 1

    def __init__(self, message: str, t_star: float):
        self.t_star = t_star
        super().__init__(message)


class TrajectoryEscaped(TrajectoryError):
    def __init__(self, t_star: float, face: Optional[tuple[int, str]] = None):
        self.face = face
        where = f" through face x{face[0] + 1} {face[1]}" if face else ""
        super().__init__(f"trajectory left the domain at t*={t_star!r}{where}", t_star)


class TrajectoryBlowUp(TrajectoryError):
    def __init__(self, t_star: float, reason: str = "blow-up"):
        self.reason = reason
        super().__init__(f"trajectory stopped by {reason} at t*={t_star!r}", t_star)


class ProbeFailed(RectiflowError):
    """The smoke probe run while building a rectification escaped or blew up."""

    exit_code = 1


class NotTrivialForm(RectiflowError):
    """A map is not of the form (t, x) -> (f(t, x), g(x))."""

    exit_code = 1
