"""Exception hierarchy shared by every module.

Two broad families matter for callers (and for the CLI exit-code contract):
``InvalidInputError`` means the caller handed us something malformed, and
``NumericalError`` means the computation itself broke down (singular kernel,
non-convergence, infeasible primal).
"""

from __future__ import annotations


class GenboundError(Exception):
    """Base class for all library errors."""


class InvalidInputError(GenboundError):
    """Malformed or inconsistent caller input."""


class UnreachableLevelError(InvalidInputError):
    """A requested excess-loss level cannot be reached along the given direction."""


class InvalidReferenceError(InvalidInputError):
    """A reference model does not satisfy the constraints it is required to."""


class NumericalError(GenboundError):
    """A numerical computation failed."""


class SingularMatrixError(NumericalError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, message: str, pivot_index: int):
        super().__init__(message)
        self.pivot_index = pivot_index


class NearSingularKernelError(NumericalError):
    """A kernel matrix is too close to singular for the requested operation."""

    def __init__(self, message: str, eigenvalue: float | None = None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class NonConvergenceError(NumericalError):
    """An iterative solver exhausted its budget."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class InfeasiblePrimalError(NumericalError):
    """Hard-margin training data is not separable: the primal has no solution."""


class ConstructionError(GenboundError):
    """An experiment's synthetic construction violated its own guarantees (a bug)."""
