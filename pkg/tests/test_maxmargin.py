import numpy as np
import pytest

from genbound.data import (
    Dataset,
    GaussianKernel,
    LinearKernel,
    Task,
    split_by_indices,
)
from genbound.errors import (
    InfeasiblePrimalError,
    InvalidInputError,
    InvalidReferenceError,
    NonConvergenceError,
)
from genbound.instances import random_svm_instance, random_svm_split
from genbound.maxmargin import (
    batch_bound_report,
    loo_report,
    sandwich_report,
    solve_hard_margin,
)


def clf(points, labels):
    return Dataset(points=np.asarray(points, dtype=float),
                   labels=np.asarray(labels, dtype=float), task=Task.CLASSIFICATION)


TWO_POINT = clf([[1.0], [-1.0]], [1.0, -1.0])


class TestSolveHardMargin:
    def test_two_point_line(self):
        m = solve_hard_margin(TWO_POINT, LinearKernel())
        # The dual optimum is any split of total mass 1; the solution itself
        # is unique: f(x) = x with unit norm.
        assert float(np.sum(m.alpha)) == pytest.approx(1.0, abs=1e-8)
        assert m.norm_sq == pytest.approx(1.0, abs=1e-8)
        assert m.decision_function(np.array([[0.7]]))[0] == pytest.approx(0.7, abs=1e-8)

    def test_single_point(self):
        m = solve_hard_margin(clf([[2.0]], [1.0]), LinearKernel())
        assert m.alpha[0] == pytest.approx(0.25, abs=1e-12)  # 1 / K(x,x)
        assert m.norm_sq == pytest.approx(0.25, abs=1e-12)

    def test_identical_zero_points_infeasible(self):
        with pytest.raises(InfeasiblePrimalError):
            solve_hard_margin(clf([[0.0], [0.0]], [1.0, -1.0]), LinearKernel())

    def test_identical_points_opposite_labels_infeasible(self):
        with pytest.raises(InfeasiblePrimalError):
            solve_hard_margin(clf([[1.0], [1.0]], [1.0, -1.0]), GaussianKernel(1.0))

    def test_nonseparable_diverges_to_cap(self):
        # Nearly identical points with opposite labels dodge the exact
        # duplicate check; the dual then runs away to the cap.
        data = clf([[1.0], [1.0 + 1e-9]], [1.0, -1.0])
        with pytest.raises(InfeasiblePrimalError):
            solve_hard_margin(data, GaussianKernel(1.0), cap=1e4)

    def test_regression_task_rejected(self):
        with pytest.raises(InvalidInputError):
            solve_hard_margin(
                Dataset(points=np.array([[1.0]]), labels=np.array([1.0]), task=Task.REGRESSION),
                LinearKernel(),
            )

    def test_max_iter_exhaustion(self):
        s, kernel = random_svm_instance(np.random.default_rng(0))
        with pytest.raises(NonConvergenceError) as exc:
            solve_hard_margin(s, kernel, tol=1e-14, max_iter=1)
        assert exc.value.residual > 0

    def test_identities_on_random_corpus(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            s, kernel = random_svm_instance(rng)
            m = solve_hard_margin(s, kernel)
            margins = m.margins(s.points, s.labels)
            assert np.all(m.alpha >= 0)
            assert abs(float(np.sum(m.alpha)) - m.norm_sq) <= 1e-6 * (1 + m.norm_sq)
            assert float(np.min(margins)) >= 1 - 1e-6
            assert float(np.max(m.alpha * np.abs(1 - margins) / (1 + m.alpha))) <= 1e-6

    def test_deterministic_and_budget_stable(self):
        s, kernel = random_svm_instance(np.random.default_rng(2))
        a = solve_hard_margin(s, kernel, max_iter=50_000)
        b = solve_hard_margin(s, kernel, max_iter=100_000)
        assert np.array_equal(a.alpha, b.alpha)
        assert a.iterations == b.iterations

    def test_monotone_norm_under_subset(self):
        rng = np.random.default_rng(3)
        for _ in range(15):
            s, kernel = random_svm_instance(rng, n_range=(4, 20))
            pair = random_svm_split(rng, s)
            full = solve_hard_margin(pair.combined(), kernel)
            sub = solve_hard_margin(pair.s_in, kernel)
            assert np.sqrt(sub.norm_sq) <= np.sqrt(full.norm_sq) + 1e-8


class TestSandwich:
    def test_two_point_split_all_zero(self):
        pair = split_by_indices(TWO_POINT, {0})
        rep = sandwich_report(pair, LinearKernel())
        # Both solutions are f(x) = x, so the norm gap and both dual
        # expressions vanish.
        assert rep.middle == pytest.approx(0.0, abs=1e-8)
        assert rep.rhs_value == pytest.approx(0.0, abs=1e-8)
        assert rep.upper_gap >= -1e-8 and rep.lower_gap >= -1e-8
        assert rep.passed

    def test_out_sample_without_support(self):
        # The held-out point sits far outside the margin: the full solution
        # coincides with the in-sample one and the bracket collapses to 0.
        data = clf([[1.0], [-1.0], [5.0]], [1.0, -1.0, 1.0])
        pair = split_by_indices(data, {0, 1})
        rep = sandwich_report(pair, LinearKernel())
        assert rep.lhs_value == pytest.approx(0.0, abs=1e-10)
        assert rep.middle == pytest.approx(0.0, abs=1e-10)
        assert rep.passed

    def test_gamma_validation(self):
        pair = split_by_indices(TWO_POINT, {0})
        with pytest.raises(InvalidInputError):
            sandwich_report(pair, LinearKernel(), gamma=np.array([-1.0]))

    def test_random_instances_prescribed_and_random_gamma(self):
        rng = np.random.default_rng(4)
        for _ in range(15):
            s, kernel = random_svm_instance(rng, n_range=(4, 20))
            pair = random_svm_split(rng, s)
            rep = sandwich_report(pair, kernel)
            assert rep.passed
            for _ in range(20):
                gamma = np.abs(rng.standard_normal(len(pair.s_out))) * rng.uniform(0, 3)
                extra = sandwich_report(pair, kernel, gamma=gamma)
                assert extra.upper_gap >= -1e-6 and extra.lower_gap >= -1e-6


class TestBatchBound:
    def test_two_point_split_hand_values(self):
        pair = split_by_indices(TWO_POINT, {0})
        rep = batch_bound_report(pair, LinearKernel())
        assert rep.lhs == pytest.approx(0.0, abs=1e-10)
        assert rep.rhs == pytest.approx(0.0, abs=1e-8)
        assert rep.passed

    def test_out_sample_outside_margin(self):
        data = clf([[1.0], [-1.0], [5.0]], [1.0, -1.0, 1.0])
        rep = batch_bound_report(split_by_indices(data, {0, 1}), LinearKernel())
        assert rep.lhs == 0.0
        assert rep.passed

    def test_bad_reference_rejected(self):
        data = clf([[1.0], [-1.0], [0.5]], [1.0, -1.0, -1.0])
        pair = split_by_indices(data, {0, 1})
        # Reference trained on the in-sample half mislabels the held-out point.
        ref = solve_hard_margin(pair.s_in, LinearKernel())
        with pytest.raises(InvalidReferenceError):
            batch_bound_report(pair, LinearKernel(), reference=ref)

    def test_random_instances_pass(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            s, kernel = random_svm_instance(rng, n_range=(4, 25))
            pair = random_svm_split(rng, s)
            assert batch_bound_report(pair, kernel).passed


class TestLooReport:
    def test_two_point_hand_values(self):
        rep = loo_report(TWO_POINT, LinearKernel())
        assert rep.per_index_hinge.tolist() == [0.0, 0.0]
        assert rep.mean_hinge == 0.0
        assert rep.bound == pytest.approx(0.5, abs=1e-10)
        assert rep.r_sq == 1.0
        assert rep.passed

    def test_all_points_outside_margin(self):
        data = clf([[2.0], [3.0], [-2.0], [-3.0]], [1.0, 1.0, -1.0, -1.0])
        rep = loo_report(data, LinearKernel())
        assert rep.mean_hinge == 0.0

    def test_random_instances_pass(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            s, kernel = random_svm_instance(rng)
            rep = loo_report(s, kernel)
            assert rep.mean_hinge <= rep.bound + 1e-6
            assert np.all(rep.per_index_hinge >= 0)
