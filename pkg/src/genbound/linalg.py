"""Dense symmetric linear algebra used by every certificate.

Thin, contract-checked wrappers around LAPACK (Cholesky, symmetric
eigendecomposition, SVD-based nullspaces, PSD inverse square roots) plus an
exact trust-region maximizer for quadratics over Euclidean balls, solved via
eigendecomposition and a secular-equation root find.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import lapack
from scipy.optimize import brentq

from .errors import InvalidInputError, NearSingularKernelError, SingularMatrixError

DEFAULT_RANK_TOL = 1e-9
DEFAULT_INV_SQRT_FLOOR_REL = 1e-12


def _as_square_sym(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
    if float(np.max(np.abs(a - a.T))) > tol * scale:
        raise InvalidInputError("matrix is not symmetric within tolerance")
    return a


def solve_spd(a: np.ndarray, b: np.ndarray, jitter: float = 0.0) -> np.ndarray:
    """Solve (A + jitter*I) x = b for symmetric positive-definite A via Cholesky.

    Raises ``SingularMatrixError`` carrying the 0-based pivot index when the
    (jittered) matrix is not positive definite.
    """
    a = _as_square_sym(a)
    b = np.asarray(b, dtype=float)
    if jitter < 0:
        raise InvalidInputError("jitter must be nonnegative")
    if jitter > 0:
        a = a + jitter * np.eye(a.shape[0])
    c, info = lapack.dpotrf(a, lower=1)
    if info != 0:
        raise SingularMatrixError(
            f"Cholesky failed: leading minor of order {info} not positive definite",
            pivot_index=int(info) - 1,
        )
    x, info = lapack.dpotrs(c, b, lower=1)
    if info != 0:  # pragma: no cover - dpotrs only fails on bad arguments
        raise SingularMatrixError("triangular solve failed", pivot_index=int(-info))
    return x


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition of a symmetric matrix, eigenvalues sorted descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column i pairs with eigenvalues[i]


def sym_eig(a: np.ndarray) -> SymEig:
    a = _as_square_sym(a)
    w, v = np.linalg.eigh(a)
    order = np.argsort(w)[::-1]
    return SymEig(eigenvalues=w[order], eigenvectors=v[:, order])


@dataclass(frozen=True)
class NullspaceBasis:
    """Orthonormal basis (columns) of the numerical nullspace of an operator."""

    basis: np.ndarray  # (cols of T, r); r may be 0
    rank_tol: float


def nullspace(t: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> NullspaceBasis:
    """Orthonormal basis of {x : ||T x|| <= rank_tol * ||T|| * ||x||}.

    The rank cut is relative to the largest singular value; an all-zero T has a
    full nullspace.
    """
    t = np.asarray(t, dtype=float)
    if t.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got shape {t.shape}")
    if rank_tol <= 0:
        raise InvalidInputError("rank_tol must be positive")
    n_cols = t.shape[1]
    if t.size == 0 or not np.any(t):
        return NullspaceBasis(basis=np.eye(n_cols), rank_tol=rank_tol)
    _, s, vt = np.linalg.svd(t, full_matrices=True)
    rank = int(np.sum(s > rank_tol * s[0]))
    return NullspaceBasis(basis=vt[rank:].T.copy(), rank_tol=rank_tol)


def inv_sqrt_psd(a: np.ndarray, floor: float | None = None) -> np.ndarray:
    """Symmetric B with B A B = I for PSD A; errors if any eigenvalue < floor.

    ``floor`` defaults to 1e-12 times the largest eigenvalue. The error is hard
    on purpose: regularizing here would silently break downstream equality
    checks, so the caller decides whether to jitter or abort.
    """
    a = _as_square_sym(a)
    w, v = np.linalg.eigh(a)
    w_max = float(w[-1]) if w.size else 0.0
    if w_max <= 0:
        raise NearSingularKernelError("matrix has no positive eigenvalue", eigenvalue=w_max)
    if floor is None:
        floor = DEFAULT_INV_SQRT_FLOOR_REL * w_max
    if floor <= 0:
        raise InvalidInputError("floor must be positive")
    w_min = float(w[0])
    if w_min < floor:
        raise NearSingularKernelError(
            f"eigenvalue {w_min:.3e} below floor {floor:.3e}", eigenvalue=w_min
        )
    return (v / np.sqrt(w)) @ v.T


class TrustRegionResult(NamedTuple):
    value: float
    argmax: np.ndarray


def trust_region_max(b: np.ndarray, g: np.ndarray, delta: float) -> TrustRegionResult:
    """Exact maximum of x^T B x + g^T x over the ball ||x||_2 <= delta.

    Parameters
    ----------
    b : symmetric matrix (any inertia)
    g : linear coefficient vector
    delta : ball radius, > 0

    Solved in the eigenbasis of B: an interior stationary point is used when it
    exists and is feasible; otherwise the boundary multiplier solves the
    secular equation sum_i c_i^2/(mu_i + nu)^2 = delta^2, with the classic
    degenerate ("hard") case handled explicitly. The maximum over a compact
    ball is always attained, so this never fails.
    """
    b = _as_square_sym(b)
    g = np.asarray(g, dtype=float)
    if delta <= 0:
        raise InvalidInputError("delta must be positive")
    if g.shape != (b.shape[0],):
        raise InvalidInputError("g must match the dimension of B")

    # Minimize f(x) = 0.5 x^T A x + q^T x with A = -2B, q = -g; flip at the end.
    eig = sym_eig(b)
    mu = -2.0 * eig.eigenvalues  # ascending eigenvalues of A
    v = eig.eigenvectors
    q = v.T @ -g

    def x_of(nu: float) -> np.ndarray:
        return -q / (mu + nu)

    def norm_sq(nu: float) -> float:
        return float(np.sum((q / (mu + nu)) ** 2))

    scale = max(1.0, float(np.max(np.abs(mu))), float(np.linalg.norm(q)) / delta)
    nu_low = max(0.0, -float(mu[0]))

    y = None
    if mu[0] > 0:
        # A positive definite: the unconstrained minimizer may be interior.
        cand = x_of(0.0)
        if float(np.linalg.norm(cand)) <= delta:
            y = cand
    if y is None:
        at_floor = np.abs(mu - mu[0]) <= 1e-14 * scale
        rest = ~at_floor
        floor_mass = float(np.sum(q[at_floor] ** 2))
        rest_norm_sq = float(np.sum((q[rest] / (mu[rest] + nu_low)) ** 2)) if np.any(rest) else 0.0
        if floor_mass <= (1e-13 * scale * delta) ** 2 and rest_norm_sq <= delta**2:
            # Hard case: pseudo-solution plus a floor-eigenvector component
            # sized to reach the boundary.
            y = np.zeros_like(q)
            y[rest] = -q[rest] / (mu[rest] + nu_low)
            y[np.argmax(at_floor)] += np.sqrt(max(delta**2 - rest_norm_sq, 0.0))
        else:
            def secular(nu: float) -> float:
                return 1.0 / np.sqrt(norm_sq(nu)) - 1.0 / delta

            # Bracket the multiplier: phi explodes (or exceeds delta^2) at the
            # pole and decays to 0 at infinity.
            lo = nu_low + 1e-13 * scale
            for _ in range(100):
                if norm_sq(lo) > delta**2:
                    break
                lo = nu_low + (lo - nu_low) / 8.0
            hi = nu_low + max(np.sqrt(floor_mass) / delta, 1e-8 * scale)
            while secular(hi) <= 0:
                hi = nu_low + 2.0 * (hi - nu_low)
            nu_star = brentq(secular, lo, hi, xtol=1e-15 * max(1.0, hi), rtol=8.9e-16)
            y = x_of(nu_star)
            nrm = float(np.linalg.norm(y))
            if nrm > 0:
                y *= delta / nrm

    x = v @ y
    value = float(x @ b @ x + g @ x)
    return TrustRegionResult(value=value, argmax=x)
