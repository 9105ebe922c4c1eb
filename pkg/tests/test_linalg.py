import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genbound.errors import InvalidInputError, NearSingularKernelError, SingularMatrixError
from genbound.linalg import (
    NullspaceBasis,
    inv_sqrt_psd,
    nullspace,
    solve_spd,
    sym_eig,
    trust_region_max,
)
from genbound.rng import Seed, derive_seed, rng_stream


class TestSolveSpd:
    def test_identity(self):
        assert solve_spd(np.eye(2), np.array([3.0, 4.0])).tolist() == [3.0, 4.0]

    def test_hand_2x2(self):
        x = solve_spd(np.array([[4.0, 2.0], [2.0, 3.0]]), np.array([2.0, 1.0]))
        assert np.allclose(x, [0.5, 0.0], atol=1e-12)

    def test_zero_pivot_reported(self):
        with pytest.raises(SingularMatrixError) as exc:
            solve_spd(np.array([[2.0, 0.0], [0.0, 0.0]]), np.array([2.0, 0.0]))
        assert exc.value.pivot_index == 1

    def test_jitter_rescues(self):
        a = np.array([[1.0, 1.0], [1.0, 1.0]])
        x = solve_spd(a, np.array([1.0, 1.0]), jitter=1e-6)
        r = (a + 1e-6 * np.eye(2)) @ x - np.array([1.0, 1.0])
        assert np.linalg.norm(r) <= 1e-10

    def test_residual_bound_random_corpus(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(1, 51))
            m = rng.standard_normal((n, n))
            a = m @ m.T + np.eye(n) * rng.uniform(0.01, 1.0)
            b = rng.standard_normal(n)
            x = solve_spd(a, b)
            resid = np.linalg.norm(a @ x - b)
            bound = 1e-8 * (np.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(b))
            assert resid <= bound


class TestSymEig:
    def test_diagonal(self):
        e = sym_eig(np.diag([3.0, 1.0]))
        assert e.eigenvalues.tolist() == [3.0, 1.0]
        assert np.allclose(np.abs(e.eigenvectors), np.eye(2))

    def test_offdiag_pair(self):
        e = sym_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(e.eigenvalues, [1.0, -1.0])

    def test_rejects_asymmetric(self):
        with pytest.raises(InvalidInputError):
            sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_reconstruction_random_corpus(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            n = int(rng.integers(1, 12))
            m = rng.standard_normal((n, n))
            a = (m + m.T) / 2
            e = sym_eig(a)
            v, w = e.eigenvectors, e.eigenvalues
            assert np.all(np.diff(w) <= 1e-12)
            assert float(np.max(np.abs(v.T @ v - np.eye(n)))) <= 1e-10
            scale = max(float(np.max(np.abs(a))), 1e-30)
            assert float(np.max(np.abs(a @ v - v * w))) <= 1e-8 * scale


class TestNullspace:
    def test_row_vector(self):
        b = nullspace(np.array([[1.0, 0.0]])).basis
        assert b.shape == (2, 1)
        assert np.allclose(np.abs(b.ravel()), [0.0, 1.0])

    def test_full_rank_empty(self):
        b = nullspace(np.eye(2))
        assert isinstance(b, NullspaceBasis) and b.basis.shape == (2, 0)

    def test_ones_row(self):
        b = nullspace(np.array([[1.0, 1.0]])).basis.ravel()
        assert np.allclose(np.abs(b), [1 / np.sqrt(2)] * 2)

    def test_zero_matrix_full_basis(self):
        b = nullspace(np.zeros((3, 4))).basis
        assert b.shape == (4, 4)

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_rank_nullity_and_orthonormality(self, data):
        rows = data.draw(st.integers(min_value=1, max_value=6))
        cols = data.draw(st.integers(min_value=1, max_value=6))
        rank = data.draw(st.integers(min_value=0, max_value=min(rows, cols)))
        rng = np.random.default_rng(data.draw(st.integers(min_value=0, max_value=2**31)))
        t = rng.standard_normal((rows, rank)) @ rng.standard_normal((rank, cols)) if rank else np.zeros((rows, cols))
        ns = nullspace(t)
        r = ns.basis.shape[1]
        assert r + rank == cols
        if r:
            assert float(np.max(np.abs(ns.basis.T @ ns.basis - np.eye(r)))) <= 1e-10
            t_norm = np.linalg.svd(t, compute_uv=False)[0] if np.any(t) else 0.0
            assert float(np.max(np.abs(t @ ns.basis))) <= max(ns.rank_tol * t_norm, 1e-12)


class TestInvSqrtPsd:
    def test_diagonal(self):
        b = inv_sqrt_psd(np.diag([4.0, 1.0]))
        assert np.allclose(b, np.diag([0.5, 1.0]), atol=1e-14)

    def test_identity(self):
        assert np.allclose(inv_sqrt_psd(np.eye(3)), np.eye(3), atol=1e-14)

    def test_floor_error(self):
        with pytest.raises(NearSingularKernelError) as exc:
            inv_sqrt_psd(np.diag([1.0, 1e-14]), floor=1e-12)
        assert exc.value.eigenvalue == pytest.approx(1e-14)

    def test_whitening_random_corpus(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            n = int(rng.integers(1, 10))
            m = rng.standard_normal((n, n))
            a = m @ m.T + 0.05 * np.eye(n)
            b = inv_sqrt_psd(a)
            assert float(np.max(np.abs(b @ a @ b - np.eye(n)))) <= 1e-6


def _disk_grid_max(b, g, delta, res=1e-3):
    # Polar brute force: boundary circle at angular/radial resolution `res`.
    thetas = np.arange(0.0, 2 * np.pi, res)
    radii = np.arange(0.0, delta + res, res)
    radii[-1] = delta
    best = -np.inf
    for r in radii:
        pts = np.stack([r * np.cos(thetas), r * np.sin(thetas)], axis=1)
        vals = np.einsum("ij,jk,ik->i", pts, b, pts) + pts @ g
        best = max(best, float(vals.max()))
    return best


class TestTrustRegionMax:
    def test_pure_eigen(self):
        val, arg = trust_region_max(np.diag([1.0, 0.0]), np.zeros(2), 1.0)
        assert val == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(np.abs(arg), [1.0, 0.0], atol=1e-8)

    def test_pure_linear(self):
        val, arg = trust_region_max(np.zeros((2, 2)), np.array([3.0, 4.0]), 2.0)
        assert val == pytest.approx(10.0, abs=1e-10)
        assert np.allclose(arg, [1.2, 1.6], atol=1e-10)

    def test_concave_with_offset_matches_grid(self):
        b = np.diag([-1.0, -2.0])
        g = np.array([1.0, 0.0])
        val, arg = trust_region_max(b, g, 0.25)
        assert val == pytest.approx(0.1875, abs=1e-12)
        assert val == pytest.approx(_disk_grid_max(b, g, 0.25), abs=1e-4)

    def test_interior_maximum(self):
        # Concave with an interior stationary point well inside the ball.
        val, arg = trust_region_max(-np.eye(2), np.array([0.2, 0.0]), 5.0)
        assert val == pytest.approx(0.01, abs=1e-12)
        assert np.allclose(arg, [0.1, 0.0], atol=1e-10)

    def test_grid_agreement_random_2d(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            m = rng.standard_normal((2, 2))
            b = (m + m.T) / 2
            g = rng.standard_normal(2)
            delta = float(rng.uniform(0.1, 1.0))
            val, arg = trust_region_max(b, g, delta)
            assert np.linalg.norm(arg) <= delta * (1 + 1e-10)
            grid = _disk_grid_max(b, g, delta)
            assert val >= grid - 1e-9
            assert val == pytest.approx(grid, abs=1e-4)

    def test_argmax_attains_value(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            n = int(rng.integers(1, 7))
            m = rng.standard_normal((n, n))
            b = (m + m.T) / 2
            g = rng.standard_normal(n)
            delta = float(rng.uniform(0.05, 4.0))
            val, arg = trust_region_max(b, g, delta)
            assert np.linalg.norm(arg) <= delta * (1 + 1e-10)
            attained = float(arg @ b @ arg + g @ arg)
            assert attained == pytest.approx(val, rel=1e-8, abs=1e-12)

    def test_delta_validation(self):
        with pytest.raises(InvalidInputError):
            trust_region_max(np.eye(2), np.zeros(2), 0.0)


class TestRng:
    def test_same_seed_same_stream(self):
        a = rng_stream(Seed(42)).standard_normal(1000)
        b = rng_stream(Seed(42)).standard_normal(1000)
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        differing = 0
        for s in range(100):
            a = rng_stream(Seed(s)).uniform(size=10)
            b = rng_stream(Seed(s + 1000)).uniform(size=10)
            differing += not np.array_equal(a, b)
        assert differing == 100

    def test_gaussian_mean_sanity(self):
        n = 100_000
        draws = rng_stream(Seed(7)).standard_normal(n)
        assert abs(float(draws.mean())) <= 4 / np.sqrt(n)

    def test_derive_seed_stable_and_distinct(self):
        s = Seed(9)
        assert derive_seed(s, 3).value == derive_seed(s, 3).value
        children = {derive_seed(s, i).value for i in range(200)}
        assert len(children) == 200

    def test_seed_validation(self):
        with pytest.raises(InvalidInputError):
            Seed(-1)
        with pytest.raises(InvalidInputError):
            Seed(2**64)
