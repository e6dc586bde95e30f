"""Error hierarchy shared by every module of the package.

Validation problems subclass ``ValueError`` as well, numerical failures
subclass ``ArithmeticError``, so callers that only know the builtin types
still catch them.
"""

from typing import Optional


class ContactSolverError(Exception):
    """Root of all errors raised by ``contact_tlamg``."""


# ---------------------------------------------------------------------------
# Input / configuration errors
# ---------------------------------------------------------------------------
class InvalidSpec(ContactSolverError, ValueError):
    pass


class InvalidMaterial(ContactSolverError, ValueError):
    pass


class ConfigError(ContactSolverError, ValueError):
    pass


class DimensionMismatch(ContactSolverError, ValueError):
    pass


class FormatError(ContactSolverError, ValueError):
    """Malformed input file; carries the file and (when known) the line."""

    def __init__(self, path: str, message: str, line: Optional[int] = None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class UnsupportedConstraint(ContactSolverError, ValueError):
    pass


# ---------------------------------------------------------------------------
# Geometry / discretization errors
# ---------------------------------------------------------------------------
class DegenerateElement(ContactSolverError, ArithmeticError):
    pass


class GeometryMismatch(ContactSolverError, ValueError):
    pass


class NotTridiagonalizable(ContactSolverError, ValueError):
    pass


# ---------------------------------------------------------------------------
# Numerical failures
# ---------------------------------------------------------------------------
class SingularPivot(ContactSolverError, ArithmeticError):
    """Block-Thomas forward sweep met a singular 2x2 pivot block."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"singular pivot block at block index {index}")


class ZeroPivot(ContactSolverError, ArithmeticError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"zero pivot in ILU(0) at row {row}")


class ZeroDiagonal(ContactSolverError, ArithmeticError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"zero diagonal entry at row {row}")


class Breakdown(ContactSolverError, ArithmeticError):
    """GCR search direction with zero A-norm."""

    def __init__(self, iteration: int, report=None):
        self.iteration = iteration
        self.report = report
        super().__init__(f"GCR breakdown at iteration {iteration}")


class IndefiniteDetected(ContactSolverError, ArithmeticError):
    def __init__(self, iteration: int, report=None):
        self.iteration = iteration
        self.report = report
        super().__init__(f"non-positive curvature p^T A p at CG iteration {iteration}")


class SetupFailure(ContactSolverError, ArithmeticError):
    pass


class NonConvergedEig(ContactSolverError, ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# Warnings
# ---------------------------------------------------------------------------
class NoConstraints(UserWarning):
    """A body is neither clamped nor coupled to a clamped body."""
