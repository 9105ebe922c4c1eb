"""Hard-margin SVM training in the dual, with certified identity reports.

The dual of the minimum-norm unit-margin problem is
    maximize  sum_i a_i - 0.5 * a' Q a   over a >= 0,
with Q_ij = y_i y_j K(x_i, x_j). It is solved by cyclic coordinate ascent
with exact one-dimensional maximization clipped at zero; the KKT residual is
the convergence certificate, which is exactly what the identity checks need.
An unbounded dual (objective or ||a||_1 past a cap) means the primal is
infeasible, i.e. the data is not separable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .data import Dataset, KernelSpec, SplitPair, Task, kernel_matrix
from .errors import (
    InfeasiblePrimalError,
    InvalidInputError,
    InvalidReferenceError,
    NonConvergenceError,
)
from .linalg import sym_eig

DEFAULT_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 200_000
DEFAULT_CAP = 1e8
_REFRESH_EVERY = 128  # periodic margin recompute to stop incremental drift


@njit(cache=True)
def _cd_ascent(q, alpha, tol, max_sweeps, cap):  # pragma: no cover - jitted
    n = q.shape[0]
    margins = q @ alpha
    kkt = np.inf
    for sweep in range(max_sweeps):
        for i in range(n):
            step = (1.0 - margins[i]) / q[i, i]
            new = alpha[i] + step
            if new < 0.0:
                new = 0.0
            delta = new - alpha[i]
            if delta != 0.0:
                alpha[i] = new
                for j in range(n):
                    margins[j] += delta * q[i, j]
        if (sweep + 1) % _REFRESH_EVERY == 0:
            margins = q @ alpha
        kkt = 0.0
        total = 0.0
        for i in range(n):
            g = 1.0 - margins[i]
            total += alpha[i]
            if alpha[i] > 0.0:
                v = abs(g)
            else:
                v = g if g > 0.0 else 0.0
            if v > kkt:
                kkt = v
        if kkt <= tol:
            return sweep + 1, kkt, 0, total
        if total > cap:
            return sweep + 1, kkt, 2, total
    total = 0.0
    for i in range(n):
        total += alpha[i]
    return max_sweeps, kkt, 1, total


@dataclass(frozen=True, eq=False)
class SvmModel:
    """A converged hard-margin solution f(x) = sum_i alpha_i y_i K(x_i, x)."""

    anchors: np.ndarray
    labels: np.ndarray
    alpha: np.ndarray
    kernel: KernelSpec
    norm_sq: float
    objective: float
    converged: bool
    iterations: int
    kkt_residual: float

    def decision_function(self, points) -> np.ndarray:
        return kernel_matrix(self.kernel, points, self.anchors) @ (self.alpha * self.labels)

    def margins(self, points, labels) -> np.ndarray:
        return np.asarray(labels, dtype=float) * self.decision_function(points)


def solve_hard_margin(
    s: Dataset,
    kernel: KernelSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_SWEEPS,
    cap: float = DEFAULT_CAP,
    warm_start: np.ndarray | None = None,
) -> SvmModel:
    """Train a hard-margin SVM by cyclic dual coordinate ascent.

    Raises ``InfeasiblePrimalError`` when the data is not separable and
    ``NonConvergenceError`` (carrying the residual KKT violation) when the
    sweep budget runs out.
    """
    if s.task is not Task.CLASSIFICATION:
        raise InvalidInputError("solve_hard_margin expects a classification dataset")
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    _, first_idx, inv = np.unique(
        s.points, axis=0, return_index=True, return_inverse=True
    )
    for group in range(first_idx.shape[0]):
        members = np.nonzero(inv == group)[0]
        if members.size > 1 and np.unique(s.labels[members]).size > 1:
            raise InfeasiblePrimalError(
                f"points {members.tolist()} coincide but carry opposite labels; "
                "no separator exists"
            )
    k = kernel_matrix(kernel, s.points, s.points)
    diag = np.diag(k)
    if np.any(diag <= 0.0):
        # A zero-norm embedding cannot satisfy a unit margin.
        raise InfeasiblePrimalError(
            f"point {int(np.argmax(diag <= 0.0))} has K(x,x) <= 0; no separator exists"
        )
    y = s.labels
    q = k * np.outer(y, y)
    q = np.ascontiguousarray(q)
    alpha = (
        np.zeros(len(s)) if warm_start is None else np.asarray(warm_start, dtype=float).copy()
    )
    if alpha.shape != (len(s),) or np.any(alpha < 0):
        raise InvalidInputError("warm_start must be a nonnegative vector of length n")
    sweeps, kkt, status, total = _cd_ascent(q, alpha, float(tol), int(max_iter), float(cap))
    if status == 2:
        raise InfeasiblePrimalError(
            f"dual diverged past cap {cap:.1e}: data is not separable"
        )
    if status == 1:
        if total > 1e6:
            # The iterate is racing along a recession direction; the budget
            # ran out before the cap did.
            raise InfeasiblePrimalError(
                f"dual norm {total:.2e} still growing after {max_iter} sweeps: "
                "data is not separable"
            )
        raise NonConvergenceError(
            f"coordinate ascent hit {max_iter} sweeps with KKT violation {kkt:.3e}",
            residual=float(kkt),
        )
    norm_sq = float(alpha @ q @ alpha)
    objective = float(np.sum(alpha) - 0.5 * norm_sq)
    return SvmModel(
        anchors=s.points.copy(),
        labels=y.copy(),
        alpha=alpha,
        kernel=kernel,
        norm_sq=norm_sq,
        objective=objective,
        converged=True,
        iterations=int(sweeps),
        kkt_residual=float(kkt),
    )


@dataclass(frozen=True, eq=False)
class SandwichReport:
    """The two-sided dual bracket of the norm gap between the full and the
    in-sample solutions, evaluated at one multiplier choice."""

    lhs_value: float
    middle: float
    rhs_value: float
    upper_gap: float
    lower_gap: float
    gamma: np.ndarray
    tol: float
    passed: bool


def _prescribed_gamma(hinges: np.ndarray, lam_max: float) -> np.ndarray:
    return 2.0 * hinges / lam_max


def sandwich_report(
    pair: SplitPair,
    kernel: KernelSpec,
    gamma: np.ndarray | None = None,
    tol: float = 1e-6,
    solver_tol: float = DEFAULT_TOL,
) -> SandwichReport:
    """Certify the weak-duality bracket around 0.5(||f_S||^2 - ||f_in||^2).

    The upper expression uses the full solution's dual weights restricted to
    the out indices; the lower expression holds for any nonnegative gamma and
    defaults to the hinge-proportional choice used by the batch bound.
    """
    full = solve_hard_margin(pair.combined(), kernel, tol=solver_tol)
    f_in = solve_hard_margin(pair.s_in, kernel, tol=solver_tol)
    n = len(pair.s_in)
    y_out = pair.s_out.labels
    k_oo = kernel_matrix(kernel, pair.s_out.points, pair.s_out.points)
    q_oo = k_oo * np.outer(y_out, y_out)
    beta_out = full.alpha[n:]
    lhs_value = 0.5 * float(beta_out @ q_oo @ beta_out)
    middle = 0.5 * (full.norm_sq - f_in.norm_sq)
    margins_in_on_out = f_in.margins(pair.s_out.points, y_out)
    if gamma is None:
        hinges = np.maximum(1.0 - margins_in_on_out, 0.0)
        lam_max = float(sym_eig(k_oo).eigenvalues[0])
        gamma = _prescribed_gamma(hinges, lam_max)
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (len(pair.s_out),) or np.any(gamma < 0):
        raise InvalidInputError("gamma must be a nonnegative vector over the out sample")
    rhs_value = float(-0.5 * gamma @ q_oo @ gamma + gamma @ (1.0 - margins_in_on_out))
    upper_gap = lhs_value - middle
    lower_gap = middle - rhs_value
    return SandwichReport(
        lhs_value=lhs_value,
        middle=middle,
        rhs_value=rhs_value,
        upper_gap=upper_gap,
        lower_gap=lower_gap,
        gamma=gamma,
        tol=tol,
        passed=bool(upper_gap >= -tol and lower_gap >= -tol),
    )


@dataclass(frozen=True)
class MarginBoundReport:
    """Certified batch bound: mean squared hinge of the in-sample solution on
    the out sample against the spectral norm-gap right-hand side."""

    lhs: float
    rhs: float
    lambda_max_out: float
    reference_norm_sq: float
    insample_norm_sq: float
    tol: float
    passed: bool


def batch_bound_report(
    pair: SplitPair,
    kernel: KernelSpec,
    reference: SvmModel | None = None,
    tol: float = 1e-6,
    solver_tol: float = DEFAULT_TOL,
) -> MarginBoundReport:
    """Check (1/m) sum hinge^2 <= (lam_max(K_out)/m) (||ref||^2 - ||f_in||^2).

    The reference defaults to the full-sample max-margin solution and must
    label every combined point with margin at least 1 - tol.
    """
    combined = pair.combined()
    if reference is None:
        reference = solve_hard_margin(combined, kernel, tol=solver_tol)
    ref_margins = reference.margins(combined.points, combined.labels)
    if float(np.min(ref_margins)) < 1.0 - tol:
        raise InvalidReferenceError(
            f"reference model has margin {float(np.min(ref_margins)):.6f} < 1 on the sample"
        )
    f_in = solve_hard_margin(pair.s_in, kernel, tol=solver_tol)
    m = len(pair.s_out)
    hinges = np.maximum(1.0 - f_in.margins(pair.s_out.points, pair.s_out.labels), 0.0)
    lhs = float(np.mean(hinges**2))
    k_oo = kernel_matrix(kernel, pair.s_out.points, pair.s_out.points)
    lam_max = float(sym_eig(k_oo).eigenvalues[0])
    rhs = (lam_max / m) * (reference.norm_sq - f_in.norm_sq)
    return MarginBoundReport(
        lhs=lhs,
        rhs=rhs,
        lambda_max_out=lam_max,
        reference_norm_sq=reference.norm_sq,
        insample_norm_sq=f_in.norm_sq,
        tol=tol,
        passed=bool(lhs <= rhs + tol),
    )


@dataclass(frozen=True, eq=False)
class LooReport:
    """Leave-one-out hinge certificate: mean_i max(1 - y_i f_{S\\i}(x_i), 0)
    against R^2 ||f_S||^2 / n."""

    per_index_hinge: np.ndarray
    mean_hinge: float
    bound: float
    r_sq: float
    norm_sq: float
    tol: float
    passed: bool


def loo_report(
    s: Dataset,
    kernel: KernelSpec,
    tol: float = 1e-6,
    solver_tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_SWEEPS,
) -> LooReport:
    """Train all n leave-one-out models (warm-started from the full solution)
    and certify the deterministic hinge bound."""
    full = solve_hard_margin(s, kernel, tol=solver_tol, max_iter=max_iter)
    n = len(s)
    k = kernel_matrix(kernel, s.points, s.points)
    q = k * np.outer(s.labels, s.labels)
    hinges = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        q_sub = np.ascontiguousarray(q[np.ix_(keep, keep)])
        alpha0 = full.alpha[keep].copy()
        sweeps, kkt, status, _ = _cd_ascent(
            q_sub, alpha0, float(solver_tol), int(max_iter), float(DEFAULT_CAP)
        )
        if status != 0:
            raise NonConvergenceError(
                f"leave-one-out subproblem {i} failed (status {status}, KKT {kkt:.3e})",
                residual=float(kkt),
            )
        margin_i = float(q[i, keep] @ alpha0)
        hinges[i] = max(1.0 - margin_i, 0.0)
    r_sq = float(np.max(np.diag(k)))
    bound = r_sq * full.norm_sq / n
    mean_hinge = float(np.mean(hinges))
    return LooReport(
        per_index_hinge=hinges,
        mean_hinge=mean_hinge,
        bound=bound,
        r_sq=r_sq,
        norm_sq=full.norm_sq,
        tol=tol,
        passed=bool(mean_hinge <= bound + tol),
    )
