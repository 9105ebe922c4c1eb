"""Minimum-norm kernel interpolation and its out-of-sample certificates.

The dissimilarity functional measures how much energy the out-sample
evaluation map can extract from unit-norm functions that vanish on every
in-sample measurement:

    D^2(S_in, S_out) = (1/m) * sup { ||T_out f||^2 : ||f|| = 1, T_in f = 0 }.

With kernel expansions f = sum_i xi_i phi_{z_i} over the combined point set,
this becomes max ||T_out xi||^2 / m over xi with xi' K xi = 1 and T_in xi = 0,
where T_in = [K_ii K_io] and T_out = [K_oi K_oo] are the in/out row blocks of
the combined Gram matrix. Whitening with zeta = K^{1/2} xi turns it into a
plain symmetric eigenproblem on an orthonormal basis of ker(T_in K^{-1/2}).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import Dataset, KernelSpec, Point, SplitPair, Task, kernel_matrix
from .errors import InvalidInputError, NearSingularKernelError, SingularMatrixError
from .linalg import DEFAULT_RANK_TOL, nullspace, solve_spd, sym_eig

# Eigenvalues at or below ZERO_CUT * lambda_max are structural zeros (e.g. a
# linear kernel on more points than dimensions); the Gram is then treated as
# exactly rank-deficient and the problem is solved on its range. Eigenvalues
# between the two cuts are genuinely ambiguous and raise instead: equality
# tests downstream cannot survive a silently regularized kernel.
GRAY_ZONE_REL = 1e-12
ZERO_CUT_REL = 1e-14


@dataclass(frozen=True, eq=False)
class Interpolator:
    """A kernel expansion f = sum_i coeffs[i] * K(anchors[i], .)."""

    anchors: np.ndarray
    coeffs: np.ndarray
    kernel: KernelSpec
    norm_sq: float
    jitter: float = 0.0
    fit_tol: float = 0.0

    def predict(self, points) -> np.ndarray:
        return kernel_matrix(self.kernel, points, self.anchors) @ self.coeffs

    def gram_norm_sq(self) -> float:
        """Recompute ||f||^2 = coeffs' K coeffs from scratch."""
        k = kernel_matrix(self.kernel, self.anchors, self.anchors)
        return float(self.coeffs @ k @ self.coeffs)


def _require_regression(s: Dataset, what: str) -> None:
    if s.task is not Task.REGRESSION:
        raise InvalidInputError(f"{what} expects a regression dataset")


def _check_distinct(points: np.ndarray, what: str) -> None:
    n = points.shape[0]
    if np.unique(points, axis=0).shape[0] != n:
        raise InvalidInputError(f"{what}: points must be pairwise distinct")


def fit_min_norm(s: Dataset, kernel: KernelSpec, jitter: float = 0.0) -> Interpolator:
    """Minimum-norm interpolant of a regression sample via the kernel system.

    Solves K alpha = y on the sample's own Gram matrix; the expansion over the
    sample points is the smallest-norm function matching every constraint.
    A positive jitter regularizes a near-singular Gram but is recorded on the
    model, which disqualifies it from equality-grade certificates.
    """
    _require_regression(s, "fit_min_norm")
    _check_distinct(s.points, "fit_min_norm")
    k = kernel_matrix(kernel, s.points, s.points)
    try:
        alpha = solve_spd(k, s.labels, jitter=jitter)
    except SingularMatrixError as exc:
        raise NearSingularKernelError(
            f"Gram matrix is singular (pivot {exc.pivot_index}); points may be "
            "too close or the kernel degenerate on this set"
        ) from exc
    norm_sq = float(s.labels @ alpha)
    fit_tol = 1e-7 * (1.0 + float(np.max(np.abs(s.labels))))
    return Interpolator(
        anchors=s.points.copy(),
        coeffs=alpha,
        kernel=kernel,
        norm_sq=norm_sq,
        jitter=jitter,
        fit_tol=fit_tol,
    )


def evaluate_loss(s: Dataset, f: Interpolator) -> float:
    """Mean squared residual of the model on a sample."""
    if s.dim != f.anchors.shape[1]:
        raise InvalidInputError("dataset and model dimensions disagree")
    residuals = s.labels - f.predict(s.points)
    return float(np.mean(residuals**2))


class DissimilarityMethod(enum.Enum):
    EIGEN = "eigen"
    SINGLETON_CLOSED_FORM = "singleton_closed_form"
    CRUDE_RADIUS = "crude_radius"


@dataclass(frozen=True, eq=False)
class DissimilarityResult:
    """D^2 between two samples, the method used, and the maximizing direction.

    ``witness`` holds expansion coefficients over the combined point set
    (in-sample points first) normalized to unit kernel norm; it is None when
    the method does not produce one or the kernel of the in-sample map is
    trivial. ``r_dim`` is the dimension of that kernel within the span of the
    combined embeddings.
    """

    d_sq: float
    method: DissimilarityMethod
    witness: np.ndarray | None
    r_dim: int | None


def _whitening_factors(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Square-root and inverse square-root factors of a PSD Gram on its range.

    Returns (F, G) with F G = identity-on-range and G' K G = I_p, p = rank.
    Structural zeros are dropped; gray-zone eigenvalues raise.
    """
    eig = sym_eig(k)
    w, v = eig.eigenvalues, eig.eigenvectors
    w_max = float(w[0])
    if w_max <= 0:
        raise NearSingularKernelError("Gram matrix has no positive eigenvalue", eigenvalue=w_max)
    gray = (w > ZERO_CUT_REL * w_max) & (w < GRAY_ZONE_REL * w_max)
    if np.any(gray):
        bad = float(w[np.argmax(gray)])
        raise NearSingularKernelError(
            f"combined Gram matrix is near-singular (eigenvalue {bad:.3e}, "
            f"largest {w_max:.3e}); refusing to regularize silently",
            eigenvalue=bad,
        )
    keep = w >= GRAY_ZONE_REL * w_max
    w_pos, v_pos = w[keep], v[:, keep]
    g = v_pos / np.sqrt(w_pos)  # columns scaled: G'KG = I
    return v_pos * np.sqrt(w_pos), g


def dissimilarity_eig(s_in: Dataset, s_out: Dataset, kernel: KernelSpec) -> DissimilarityResult:
    """Exact D^2 via the whitened symmetric eigenproblem.

    The value is the top eigenvalue, divided by |S_out|, of
    H = Psi' W' T_out' T_out W Psi, where W maps whitened coordinates back to
    expansion coefficients (W' K W = I) and Psi spans ker(T_in W).
    """
    if s_in.dim != s_out.dim:
        raise InvalidInputError("samples must share one dimension")
    z = np.vstack([s_in.points, s_out.points])
    _check_distinct(z, "dissimilarity_eig")
    n, m = len(s_in), len(s_out)
    k = kernel_matrix(kernel, z, z)
    t_in = k[:n, :]
    t_out = k[n:, :]
    _, w_map = _whitening_factors(k)
    basis = nullspace(t_in @ w_map, DEFAULT_RANK_TOL)
    r = basis.basis.shape[1]
    if r == 0:
        return DissimilarityResult(
            d_sq=0.0, method=DissimilarityMethod.EIGEN, witness=None, r_dim=0
        )
    a_out = t_out @ w_map @ basis.basis  # (m, r)
    h = a_out.T @ a_out
    h = (h + h.T) / 2.0
    eig = sym_eig(h)
    d_sq = max(float(eig.eigenvalues[0]), 0.0) / m
    xi = w_map @ (basis.basis @ eig.eigenvectors[:, 0])
    q = float(xi @ k @ xi)
    if q > 0:
        xi = xi / np.sqrt(q)
    return DissimilarityResult(
        d_sq=d_sq, method=DissimilarityMethod.EIGEN, witness=xi, r_dim=r
    )


def dissimilarity_singleton(s_in: Dataset, x_out, kernel: KernelSpec) -> DissimilarityResult:
    """Closed-form singleton D^2: the squared kernel distance from the held-out
    embedding to the span of the in-sample embeddings (the power function)."""
    x = x_out.as_array() if isinstance(x_out, Point) else np.asarray(x_out, dtype=float)
    if x.ndim != 1 or x.shape[0] != s_in.dim:
        raise InvalidInputError("x_out must be a single point of matching dimension")
    _check_distinct(s_in.points, "dissimilarity_singleton")
    if np.any(np.all(s_in.points == x, axis=1)):
        raise InvalidInputError("x_out must not be an in-sample point")
    k_in = kernel_matrix(kernel, s_in.points, s_in.points)
    k_x = kernel_matrix(kernel, s_in.points, x[None, :]).ravel()
    try:
        coeffs = solve_spd(k_in, k_x)
    except SingularMatrixError as exc:
        raise NearSingularKernelError(
            f"in-sample Gram matrix is singular (pivot {exc.pivot_index})"
        ) from exc
    d_sq = float(kernel_matrix(kernel, x[None, :], x[None, :])[0, 0] - k_x @ coeffs)
    return DissimilarityResult(
        d_sq=max(d_sq, 0.0),
        method=DissimilarityMethod.SINGLETON_CLOSED_FORM,
        witness=None,
        r_dim=1,
    )


def dissimilarity_crude(s_out: Dataset, kernel: KernelSpec) -> DissimilarityResult:
    """Radius upper bound: D^2 <= max_x K(x, x) over the out sample."""
    diag = np.array(
        [kernel_matrix(kernel, p[None, :], p[None, :])[0, 0] for p in s_out.points]
    )
    return DissimilarityResult(
        d_sq=float(np.max(diag)),
        method=DissimilarityMethod.CRUDE_RADIUS,
        witness=None,
        r_dim=None,
    )


@dataclass(frozen=True)
class InterpBoundReport:
    """Certified out-of-sample bounds for the in-sample min-norm interpolant.

    Two right-hand sides are checked against lhs = L(S_out, f_in): the
    perturbation form D^2 * ||f_full - f_in||^2 and the norm-gap form
    D^2 * (||f_full||^2 - ||f_in||^2). Both slacks are nonnegative in exact
    arithmetic; ``passed`` allows -tol of rounding.
    """

    lhs: float
    d_sq: float
    diff_norm_sq: float
    norm_sq_full: float
    norm_sq_in: float
    rhs_diff_norm: float
    rhs_norm_gap: float
    slack_diff_norm: float
    slack_norm_gap: float
    tol: float
    passed: bool


def interp_bound_report(pair: SplitPair, kernel: KernelSpec, tol_rel: float = 1e-7) -> InterpBoundReport:
    """Fit on S_in and on the union, then certify both bound forms."""
    _require_regression(pair.s_in, "interp_bound_report")
    combined = pair.combined()
    f_in = fit_min_norm(pair.s_in, kernel)
    f_full = fit_min_norm(combined, kernel)
    n = len(pair.s_in)
    k_comb = kernel_matrix(kernel, combined.points, combined.points)
    alpha_in_padded = np.concatenate([f_in.coeffs, np.zeros(len(pair.s_out))])
    diff = f_full.coeffs - alpha_in_padded
    diff_norm_sq = float(diff @ k_comb @ diff)
    lhs = evaluate_loss(pair.s_out, f_in)
    dis = dissimilarity_eig(pair.s_in, pair.s_out, kernel)
    rhs_diff_norm = dis.d_sq * diff_norm_sq
    rhs_norm_gap = dis.d_sq * (f_full.norm_sq - f_in.norm_sq)
    tol = tol_rel * (1.0 + abs(lhs))
    slack_diff_norm = rhs_diff_norm - lhs
    slack_norm_gap = rhs_norm_gap - lhs
    return InterpBoundReport(
        lhs=lhs,
        d_sq=dis.d_sq,
        diff_norm_sq=diff_norm_sq,
        norm_sq_full=f_full.norm_sq,
        norm_sq_in=f_in.norm_sq,
        rhs_diff_norm=rhs_diff_norm,
        rhs_norm_gap=rhs_norm_gap,
        slack_diff_norm=slack_diff_norm,
        slack_norm_gap=slack_norm_gap,
        tol=tol,
        passed=bool(slack_diff_norm >= -tol and slack_norm_gap >= -tol),
    )


@dataclass(frozen=True, eq=False)
class SharpnessWitness:
    """An in-sample interpolant of norm exactly r whose out-of-sample loss
    attains the dissimilarity lower bound."""

    model: Interpolator
    achieved: float
    certified_rhs: float


def sharpness_witness(
    pair: SplitPair, kernel: KernelSpec, r: float, eps: float
) -> SharpnessWitness:
    """Construct f = f_in + c * g with c^2 = r^2 - ||f_in||^2 and g the exact
    maximizing direction, signed so the out-sample residuals reinforce.

    The construction interpolates S_in, has ||f|| = r exactly (g is orthogonal
    to f_in), and satisfies L(S_out, f) >= D^2 ||f - f_in||^2 - eps; with the
    exact top eigendirection the eps slack is never needed.
    """
    if eps <= 0:
        raise InvalidInputError("eps must be positive")
    f_in = fit_min_norm(pair.s_in, kernel)
    norm_in = np.sqrt(max(f_in.norm_sq, 0.0))
    if r < norm_in - 1e-12 * (1.0 + norm_in):
        raise InvalidInputError(f"r={r} must be at least the in-sample norm {norm_in}")
    c_sq = max(r**2 - f_in.norm_sq, 0.0)
    dis = dissimilarity_eig(pair.s_in, pair.s_out, kernel)
    if c_sq == 0.0 or dis.witness is None:
        achieved = evaluate_loss(pair.s_out, f_in)
        return SharpnessWitness(model=f_in, achieved=achieved, certified_rhs=0.0)

    combined = pair.combined()
    k_comb = kernel_matrix(kernel, combined.points, combined.points)
    n = len(pair.s_in)
    c = np.sqrt(c_sq)
    # Out-sample values of the witness direction and the in-model residuals.
    t_out = k_comb[n:, :]
    b = t_out @ dis.witness
    a = f_in.predict(pair.s_out.points) - pair.s_out.labels
    sign = 1.0 if float(a @ b) >= 0.0 else -1.0
    coeffs = np.concatenate([f_in.coeffs, np.zeros(len(pair.s_out))]) + c * sign * dis.witness
    norm_sq = float(coeffs @ k_comb @ coeffs)
    model = Interpolator(
        anchors=combined.points.copy(),
        coeffs=coeffs,
        kernel=kernel,
        norm_sq=norm_sq,
        jitter=0.0,
        fit_tol=f_in.fit_tol,
    )
    achieved = evaluate_loss(pair.s_out, model)
    diff = c * sign * dis.witness
    certified_rhs = dis.d_sq * float(diff @ k_comb @ diff)
    return SharpnessWitness(model=model, achieved=achieved, certified_rhs=certified_rhs)
