"""Seeded random instance generators for the certificate sweeps.

Instance sizes respect each kernel's rank budget (a linear kernel on more
points than dimensions has a structurally singular Gram, a polynomial kernel
caps out at its feature-space dimension), and point clouds are resampled
until the combined Gram is comfortably invertible, so equality-grade
certificates never trip the near-singular guard.
"""

from __future__ import annotations

import math

import numpy as np

from .data import (
    Dataset,
    GaussianKernel,
    KernelSpec,
    LinearKernel,
    PolynomialKernel,
    SplitPair,
    Task,
    kernel_matrix,
)
from .errors import ConstructionError
from .parametric import QuadraticEvaluation

_COND_FLOOR = 1e-8  # required lambda_min / lambda_max of the combined Gram


def _min_pairwise_dist(pts: np.ndarray) -> float:
    if pts.shape[0] < 2:
        return math.inf
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.sum(diff**2, axis=2)
    np.fill_diagonal(d2, np.inf)
    return float(np.sqrt(d2.min()))


def _draw_separated(rng: np.random.Generator, n: int, d: int, box: float, sep: float) -> np.ndarray:
    for _ in range(200):
        pts = rng.uniform(-box, box, size=(n, d))
        if _min_pairwise_dist(pts) >= sep:
            return pts
    raise ConstructionError(f"could not place {n} separated points in dimension {d}")


def _gram_ok(kernel: KernelSpec, pts: np.ndarray) -> bool:
    w = np.linalg.eigvalsh(kernel_matrix(kernel, pts, pts))
    return w[-1] > 0 and w[0] > _COND_FLOOR * w[-1]


def _poly_feature_dim(d: int, degree: int) -> int:
    return math.comb(d + degree, degree)


def random_kernel(rng: np.random.Generator, kinds=("linear", "polynomial", "gaussian")) -> KernelSpec:
    kind = kinds[int(rng.integers(len(kinds)))]
    if kind == "linear":
        return LinearKernel()
    if kind == "polynomial":
        return PolynomialKernel(degree=int(rng.integers(2, 4)), offset=float(rng.uniform(0.3, 1.5)))
    return GaussianKernel(gamma=float(rng.uniform(0.4, 1.5)))


def _interp_sizes(rng: np.random.Generator, kernel: KernelSpec, d: int, n_in_cap: int, m_cap: int, m_fixed):
    if isinstance(kernel, LinearKernel):
        budget = d
    elif isinstance(kernel, PolynomialKernel):
        budget = _poly_feature_dim(d, kernel.degree)
    else:
        budget = {1: 8, 2: 16}.get(d, n_in_cap + m_cap)
    m_lo = m_fixed if m_fixed is not None else 1
    budget = max(budget, m_lo + 1)
    m_hi = min(m_cap, budget - 1) if m_fixed is None else m_fixed
    m = int(rng.integers(m_lo, m_hi + 1)) if m_fixed is None else m_fixed
    n_in = int(rng.integers(1, min(n_in_cap, budget - m) + 1))
    return n_in, m


def random_interp_instance(
    rng: np.random.Generator,
    kinds=("linear", "polynomial", "gaussian"),
    d_range=(1, 5),
    n_in_cap: int = 20,
    m_cap: int = 10,
    m_fixed: int | None = None,
) -> tuple[SplitPair, KernelSpec]:
    """A regression split plus kernel with an invertible combined Gram."""
    for _ in range(80):
        kernel = random_kernel(rng, kinds)
        d_lo = 2 if isinstance(kernel, LinearKernel) else d_range[0]
        d = int(rng.integers(max(d_lo, d_range[0]), d_range[1] + 1))
        n_in, m = _interp_sizes(rng, kernel, d, n_in_cap, m_cap, m_fixed)
        total = n_in + m
        sep = 0.5 if d == 1 else 0.35
        try:
            pts = _draw_separated(rng, total, d, box=2.0, sep=sep)
        except ConstructionError:
            continue
        if not _gram_ok(kernel, pts):
            continue
        labels = rng.standard_normal(total)
        s_in = Dataset(points=pts[:n_in], labels=labels[:n_in], task=Task.REGRESSION)
        s_out = Dataset(points=pts[n_in:], labels=labels[n_in:], task=Task.REGRESSION)
        return SplitPair(s_in=s_in, s_out=s_out), kernel
    raise ConstructionError("failed to build a well-conditioned interpolation instance")


def _margin_teacher(
    rng: np.random.Generator,
    kernel: KernelSpec,
    d: int,
    norm: float,
    n_anchors: int = 5,
    margin: float = 1.0,
):
    """A kernel expansion of norm exactly ``norm`` that attains values past the
    margin somewhere near its anchors; returns (anchors, coefficients)."""
    for _ in range(200):
        anchors = rng.standard_normal((n_anchors, d))
        coef = rng.standard_normal(n_anchors)
        ka = kernel_matrix(kernel, anchors, anchors)
        scale_sq = float(coef @ ka @ coef)
        if scale_sq < 1e-10:
            continue
        coef = coef * (norm / math.sqrt(scale_sq))
        if float(np.max(np.abs(ka @ coef))) >= 1.2 * margin:
            return anchors, coef
    raise ConstructionError("failed to build a margin teacher")


def _teacher_values(kernel: KernelSpec, anchors: np.ndarray, coef: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return kernel_matrix(kernel, pts, anchors) @ coef


def draw_margin_sample(
    rng: np.random.Generator,
    kernel: KernelSpec,
    anchors: np.ndarray,
    coef: np.ndarray,
    count: int,
    margin: float = 1.0,
    radius: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """i.i.d. draws from an anchor-centered mixture, rejected until the
    teacher's value clears the margin; labels are the teacher's signs."""
    d = anchors.shape[1]
    xs: list[np.ndarray] = []
    ys: list[float] = []
    for _ in range(400 * count + 400):
        if len(xs) == count:
            break
        if rng.uniform() < 0.5:
            x = rng.standard_normal(d)
        else:
            j = int(rng.integers(anchors.shape[0]))
            x = anchors[j] + 0.5 * rng.standard_normal(d)
        if radius is not None:
            nrm = float(np.linalg.norm(x))
            if nrm > radius:
                x = x * (radius / nrm) * rng.uniform() ** (1.0 / d)
        v = float(_teacher_values(kernel, anchors, coef, x[None, :])[0])
        if abs(v) >= margin:
            xs.append(x)
            ys.append(math.copysign(1.0, v))
    if len(xs) < count:
        raise ConstructionError("margin rejection sampling starved")
    return np.array(xs), np.array(ys)


def random_svm_instance(
    rng: np.random.Generator,
    kinds=("linear", "polynomial", "gaussian"),
    d_range=(1, 4),
    n_range=(4, 30),
    norm_range=(1.2, 3.0),
) -> tuple[Dataset, KernelSpec]:
    """A separable classification sample (a norm-bounded margin teacher
    labels it, so the hard-margin problem is feasible by construction)."""
    for _ in range(80):
        kernel = random_kernel(rng, kinds)
        d = int(rng.integers(d_range[0], d_range[1] + 1))
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        norm = float(rng.uniform(*norm_range))
        try:
            anchors, coef = _margin_teacher(rng, kernel, d, norm)
            pts, labels = draw_margin_sample(rng, kernel, anchors, coef, n)
        except ConstructionError:
            continue
        if _min_pairwise_dist(pts) < 1e-6:
            continue
        return Dataset(points=pts, labels=labels, task=Task.CLASSIFICATION), kernel
    raise ConstructionError("failed to build a separable classification instance")


def random_svm_split(rng: np.random.Generator, s: Dataset) -> SplitPair:
    n = len(s)
    n_in = int(rng.integers(1, n))
    idx = rng.permutation(n)[:n_in]
    from .data import split_by_indices

    return split_by_indices(s, idx)


def random_quadratic(rng: np.random.Generator, d: int, n_range=(0, 50), f_star=None) -> QuadraticEvaluation:
    n_lo = max(d, 2, n_range[0])
    n = int(rng.integers(n_lo, max(n_range[1], n_lo) + 1))
    for _ in range(50):
        x = rng.standard_normal((n, d))
        sv = np.linalg.svd(x, compute_uv=False)
        if sv[-1] > 1e-4 * sv[0]:
            break
    if f_star is None:
        f_star = rng.standard_normal(d)
    y = x @ f_star + rng.uniform(0.0, 1.0) * rng.standard_normal(n)
    return QuadraticEvaluation(design=x, targets=y)


def random_quadratic_pair(
    rng: np.random.Generator, d_range=(1, 10), n_range=(0, 50)
) -> tuple[QuadraticEvaluation, QuadraticEvaluation]:
    """Two full-rank quadratic evaluations in one dimension; half the time they
    share the underlying signal, otherwise they are independent."""
    d = int(rng.integers(d_range[0], d_range[1] + 1))
    shared = rng.standard_normal(d) if rng.uniform() < 0.5 else None
    q_in = random_quadratic(rng, d, n_range, f_star=shared)
    q_out = random_quadratic(rng, d, n_range, f_star=shared)
    return q_in, q_out
