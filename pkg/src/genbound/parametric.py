"""Sensitivity certificates for quadratic evaluations on R^d.

An evaluation is L(q, f) = (1/n) ||y - X f||^2. Every constant below is exact
for this family; one normalization is fixed once and used everywhere:

    loss               L(q, f)        = (1/n) ||y - X f||^2   (no 1/2 factor)
    derivative         DL(q, f)       = (2/n) X' (X f - y)
    growth constant    c(q)           = smallest nonzero eigenvalue of X'X/n
    derivative Lipschitz  M(q)        = 2 * largest eigenvalue of X'X/n
    metric regularity  alpha(q)       = 2 * smallest nonzero eigenvalue of X'X/n

so that L - L_min = (f - proj)' (X'X/n) (f - proj) >= c * dist(f, argmin)^2
with equality along the matching eigendirection, and ||DL(q, f)|| >=
alpha * dist(f, argmin) globally (quadratics need no neighborhood gating).

The in/out evaluation gap m(f) = L(q_out, f) - L(q_in, f) is itself quadratic;
its exact local Lipschitz constant and ball oscillation drive the growth and
localization bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, UnreachableLevelError
from .linalg import DEFAULT_RANK_TOL, nullspace, sym_eig, trust_region_max
from .rng import Seed, rng_stream


@dataclass(frozen=True, eq=False)
class QuadraticEvaluation:
    """Mean squared residual loss over a design matrix and target vector."""

    design: np.ndarray  # (n, d)
    targets: np.ndarray  # (n,)

    def __post_init__(self):
        x = np.asarray(self.design, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1:
            raise InvalidInputError(f"design must be a nonempty matrix, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise InvalidInputError("targets must match the number of design rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidInputError("design and targets must be finite")
        object.__setattr__(self, "design", x)
        object.__setattr__(self, "targets", y)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def dim(self) -> int:
        return self.design.shape[1]

    def loss(self, f: np.ndarray) -> float:
        r = self.targets - self.design @ f
        return float(r @ r) / self.n

    def grad(self, f: np.ndarray) -> np.ndarray:
        return (2.0 / self.n) * (self.design.T @ (self.design @ f - self.targets))

    def hessian_half(self) -> np.ndarray:
        """X'X/n, i.e. half the loss Hessian."""
        h = self.design.T @ self.design / self.n
        return (h + h.T) / 2.0


@dataclass(frozen=True, eq=False)
class MinimizerSet:
    """The affine set of least-squares minimizers: particular + ker(X)."""

    particular: np.ndarray
    null_basis: np.ndarray  # (d, k), orthonormal columns; k = 0 when unique
    unique: bool

    def distance(self, f: np.ndarray) -> float:
        p = f - self.particular
        if self.null_basis.shape[1]:
            p = p - self.null_basis @ (self.null_basis.T @ p)
        return float(np.linalg.norm(p))

    def project(self, f: np.ndarray) -> np.ndarray:
        """Nearest minimizer to f."""
        p = f - self.particular
        if self.null_basis.shape[1]:
            return self.particular + self.null_basis @ (self.null_basis.T @ p)
        return self.particular.copy()


def minimize(q: QuadraticEvaluation) -> MinimizerSet:
    """Least-squares minimizer set: pseudoinverse solution plus ker(X)."""
    sol, _, rank, _ = np.linalg.lstsq(q.design, q.targets, rcond=None)
    basis = nullspace(q.design, DEFAULT_RANK_TOL).basis
    return MinimizerSet(particular=sol, null_basis=basis, unique=basis.shape[1] == 0)


def epsilon_minimizer(
    q: QuadraticEvaluation, eps: float, direction: np.ndarray
) -> np.ndarray:
    """The point f0 + t * direction whose excess loss is exactly eps.

    The excess along a ray from a minimizer is t^2 ||X v||^2 / n, so t solves
    a scalar quadratic. A direction in ker(X) cannot reach a positive level.
    """
    if eps < 0:
        raise InvalidInputError("eps must be nonnegative")
    v = np.asarray(direction, dtype=float)
    if v.shape != (q.dim,):
        raise InvalidInputError("direction must be a d-vector")
    f0 = minimize(q).particular
    if eps == 0:
        return f0
    xv_sq = float(np.sum((q.design @ v) ** 2)) / q.n
    if xv_sq <= 0:
        raise UnreachableLevelError(
            "direction lies in the design nullspace; no positive excess level is reachable"
        )
    t = math.sqrt(eps / xv_sq)
    return f0 + t * v


def _positive_eigs(h: np.ndarray) -> np.ndarray:
    w = sym_eig(h).eigenvalues
    if w.size == 0 or w[0] <= 0:
        raise InvalidInputError("design matrix is identically zero")
    return w[w > DEFAULT_RANK_TOL * w[0]]


@dataclass(frozen=True)
class GrowthCertificate:
    """Exact quadratic-growth constant and the neighborhood radius it covers."""

    c: float
    region_radius: float


def growth_certificate(q: QuadraticEvaluation, region_radius: float | None = None) -> GrowthCertificate:
    """c = smallest nonzero eigenvalue of X'X/n; the growth inequality is
    global for quadratics, so the radius only gates which trial points count."""
    w = _positive_eigs(q.hessian_half())
    if region_radius is None:
        scale = float(np.max(np.linalg.norm(q.design, axis=1)))
        region_radius = 10.0 * max(1.0, scale)
    if region_radius <= 0:
        raise InvalidInputError("region_radius must be positive")
    return GrowthCertificate(c=float(w[-1]), region_radius=float(region_radius))


@dataclass(frozen=True, eq=False)
class EvalGap:
    """The quadratic m(f) = L(q_out, f) - L(q_in, f) = f'Bf + g'f + const."""

    b: np.ndarray
    g: np.ndarray
    const: float

    def value(self, f: np.ndarray) -> float:
        return float(f @ self.b @ f + self.g @ f + self.const)

    def grad(self, f: np.ndarray) -> np.ndarray:
        return 2.0 * (self.b @ f) + self.g


def eval_gap(q_in: QuadraticEvaluation, q_out: QuadraticEvaluation) -> EvalGap:
    if q_in.dim != q_out.dim:
        raise InvalidInputError("evaluations must share one dimension")
    b = q_out.hessian_half() - q_in.hessian_half()
    g = -2.0 * (
        q_out.design.T @ q_out.targets / q_out.n - q_in.design.T @ q_in.targets / q_in.n
    )
    const = float(q_out.targets @ q_out.targets) / q_out.n - float(
        q_in.targets @ q_in.targets
    ) / q_in.n
    return EvalGap(b=(b + b.T) / 2.0, g=g, const=const)


def gap_lipschitz(
    q_in: QuadraticEvaluation, q_out: QuadraticEvaluation, rho: float
) -> float:
    """Exact sup of ||grad m|| over the radius-rho patch around the minimizers
    of q_in; the mean value theorem makes this a valid Lipschitz constant for
    the evaluation gap on that patch, and it is tight for quadratics.

    With a unique minimizer the sup is a single trust-region problem on
    ||grad m(f0 + step)||^2. With an affine minimizer set the patch (radius
    rho along the set, radius rho across) is enclosed in the ball of radius
    2*rho, giving a still-valid upper bound.
    """
    if rho <= 0:
        raise InvalidInputError("rho must be positive")
    gap = eval_gap(q_in, q_out)
    mset = minimize(q_in)
    radius = rho if mset.unique else 2.0 * rho
    v = gap.grad(mset.particular)
    bb = 4.0 * (gap.b @ gap.b)
    bb = (bb + bb.T) / 2.0
    res = trust_region_max(bb, 4.0 * (gap.b @ v), radius)
    return math.sqrt(max(res.value + float(v @ v), 0.0))


def _in_patch(f: np.ndarray, mset: MinimizerSet, rho: float) -> bool:
    p = f - mset.particular
    if mset.null_basis.shape[1]:
        mu = mset.null_basis.T @ p
        perp = p - mset.null_basis @ mu
        excess = max(float(np.linalg.norm(mu)) - rho, 0.0)
        return excess**2 + float(perp @ perp) <= rho**2 + 1e-12
    return float(np.linalg.norm(p)) <= rho + 1e-12


@dataclass(frozen=True)
class GrowthBoundReport:
    """Trial check that eps-minimizers of the out evaluation stay within
    kappa/c + sqrt(eps/c) of the in-sample minimizer set."""

    c: float
    kappa: float
    eps: float
    rho: float
    trials: int
    skipped: int
    max_ratio: float
    worst_slack: float
    tol: float
    passed: bool


def check_growth_bound(
    q_in: QuadraticEvaluation,
    q_out: QuadraticEvaluation,
    eps: float,
    rho: float,
    trial_dirs: int,
    seed: Seed | int,
    tol: float = 1e-8,
) -> GrowthBoundReport:
    """Probe random eps-minimizers of q_out and certify the distance bound.

    Trials whose probe lands outside the radius-rho patch are skipped, never
    fabricated; the report counts them.
    """
    cert = growth_certificate(q_in, region_radius=rho)
    kappa = gap_lipschitz(q_in, q_out, rho)
    bound = kappa / cert.c + math.sqrt(eps / cert.c)
    mset_in = minimize(q_in)
    rng = rng_stream(seed)
    skipped = 0
    max_ratio = 0.0
    worst_slack = math.inf
    done = 0
    for _ in range(trial_dirs):
        v = rng.standard_normal(q_out.dim)
        nrm = float(np.linalg.norm(v))
        if nrm == 0.0:
            skipped += 1
            continue
        try:
            f = epsilon_minimizer(q_out, eps, v / nrm)
        except UnreachableLevelError:
            skipped += 1
            continue
        if not _in_patch(f, mset_in, rho):
            skipped += 1
            continue
        dist = mset_in.distance(f)
        slack = bound - dist
        worst_slack = min(worst_slack, slack)
        if bound > 0:
            max_ratio = max(max_ratio, dist / bound)
        done += 1
    if done == 0:
        worst_slack = math.inf
    return GrowthBoundReport(
        c=cert.c,
        kappa=kappa,
        eps=eps,
        rho=rho,
        trials=done,
        skipped=skipped,
        max_ratio=max_ratio,
        worst_slack=worst_slack,
        tol=tol,
        passed=bool(done == 0 or worst_slack >= -tol),
    )


@dataclass(frozen=True)
class MetricRegularityReport:
    """Certified derivative-gap bound on the out-of-sample excess of the
    nearest in-sample minimizer."""

    lhs: float
    rhs: float
    lipschitz: float
    regularity: float
    grad_gap: float
    slack: float
    tol: float
    passed: bool


def check_metric_regularity(
    q_in: QuadraticEvaluation, q_out: QuadraticEvaluation, tol: float = 1e-8
) -> MetricRegularityReport:
    """Check L(q_out, f_in) - min L(q_out, .) <= (M / 2 alpha^2) *
    ||DL(q_in, f_out) - DL(q_out, f_out)||^2 with the exact constants.

    f_out is the pseudoinverse minimizer of q_out and f_in the nearest
    in-sample minimizer. M is the derivative Lipschitz constant of the out
    evaluation; alpha the metric-regularity constant of the in evaluation.
    """
    if q_in.dim != q_out.dim:
        raise InvalidInputError("evaluations must share one dimension")
    mset_out = minimize(q_out)
    mset_in = minimize(q_in)
    f_out = mset_out.particular
    f_in = mset_in.project(f_out)
    min_out = q_out.loss(f_out)
    lhs = q_out.loss(f_in) - min_out
    if not np.any(q_in.design):
        # Degenerate: every point minimizes the in evaluation, so f_in = f_out.
        return MetricRegularityReport(
            lhs=lhs, rhs=0.0, lipschitz=0.0, regularity=0.0, grad_gap=0.0,
            slack=-lhs, tol=tol, passed=bool(lhs <= tol),
        )
    m_const = 2.0 * float(sym_eig(q_out.hessian_half()).eigenvalues[0])
    alpha = 2.0 * float(_positive_eigs(q_in.hessian_half())[-1])
    grad_gap = float(np.linalg.norm(q_in.grad(f_out) - q_out.grad(f_out)))
    rhs = m_const / (2.0 * alpha**2) * grad_gap**2
    slack = rhs - lhs
    return MetricRegularityReport(
        lhs=lhs,
        rhs=rhs,
        lipschitz=m_const,
        regularity=alpha,
        grad_gap=grad_gap,
        slack=slack,
        tol=tol,
        passed=bool(slack >= -tol),
    )


@dataclass(frozen=True, eq=False)
class LocalizationCurve:
    """Radius-indexed in-sample growth h and gap oscillation K, plus the
    smallest radius where the growth wins (inf sentinel when it never does)."""

    deltas: np.ndarray
    h_vals: np.ndarray
    k_vals: np.ndarray
    delta_star: float


def _curve_functions(q_in: QuadraticEvaluation, q_out: QuadraticEvaluation):
    mset = minimize(q_in)
    if not mset.unique:
        raise InvalidInputError("localization requires a unique in-sample minimizer")
    f_in = mset.particular
    lam_min = float(sym_eig(q_in.hessian_half()).eigenvalues[-1])
    gap = eval_gap(q_in, q_out)
    v = gap.grad(f_in)

    def h(delta: float) -> float:
        # Infimum of the in-sample excess over the sphere of radius delta.
        return lam_min * delta**2

    def k(delta: float) -> float:
        # Supremum of |m(f_in + step) - m(f_in)| over the closed ball.
        up = trust_region_max(gap.b, v, delta).value
        down = trust_region_max(-gap.b, -v, delta).value
        return max(up, down, 0.0)

    return f_in, h, k


def localization_curve(
    q_in: QuadraticEvaluation,
    q_out: QuadraticEvaluation,
    deltas,
    refine_rel: float = 1e-6,
) -> LocalizationCurve:
    """Evaluate h and K on a grid and locate the crossing radius.

    The crossing is the smallest grid delta with K < h, refined by bisection
    against the previous grid point; when the first grid point already
    satisfies the predicate it is returned as is, and when no grid point does
    the sentinel is +inf.
    """
    deltas = np.asarray(deltas, dtype=float)
    if deltas.ndim != 1 or deltas.size == 0:
        raise InvalidInputError("deltas must be a nonempty 1-d grid")
    if np.any(deltas <= 0) or np.any(np.diff(deltas) <= 0):
        raise InvalidInputError("deltas must be positive and strictly increasing")
    _, h, k = _curve_functions(q_in, q_out)
    h_vals = np.array([h(d) for d in deltas])
    k_vals = np.array([k(d) for d in deltas])
    wins = k_vals < h_vals
    if not np.any(wins):
        delta_star = math.inf
    else:
        first = int(np.argmax(wins))
        if first == 0:
            delta_star = float(deltas[0])
        else:
            lo, hi = float(deltas[first - 1]), float(deltas[first])
            while hi - lo > refine_rel * hi:
                mid = 0.5 * (lo + hi)
                if k(mid) < h(mid):
                    hi = mid
                else:
                    lo = mid
            delta_star = hi
    return LocalizationCurve(deltas=deltas, h_vals=h_vals, k_vals=k_vals, delta_star=delta_star)


@dataclass(frozen=True)
class LocalizationBoundReport:
    """Certified bound ||f_in - f_out|| <= delta_star (vacuous at the inf
    sentinel, which is reported, not failed)."""

    distance: float
    delta_star: float
    vacuous: bool
    tol: float
    passed: bool


def check_localization_bound(
    q_in: QuadraticEvaluation,
    q_out: QuadraticEvaluation,
    deltas,
    tol: float = 1e-9,
    refine_rel: float = 1e-6,
) -> LocalizationBoundReport:
    mset_out = minimize(q_out)
    if not mset_out.unique:
        raise InvalidInputError("localization requires a unique out-sample minimizer")
    curve = localization_curve(q_in, q_out, deltas, refine_rel=refine_rel)
    f_in = minimize(q_in).particular
    distance = float(np.linalg.norm(f_in - mset_out.particular))
    vacuous = math.isinf(curve.delta_star)
    passed = vacuous or distance <= curve.delta_star + tol
    return LocalizationBoundReport(
        distance=distance,
        delta_star=curve.delta_star,
        vacuous=vacuous,
        tol=tol,
        passed=bool(passed),
    )
