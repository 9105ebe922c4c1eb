import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genbound.data import (
    Dataset,
    GaussianKernel,
    LinearKernel,
    Point,
    PolynomialKernel,
    Task,
    gram,
    kernel_eval,
    kernel_matrix,
    load_csv,
    save_csv,
    split_by_indices,
)
from genbound.errors import InvalidInputError

finite_floats = st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False)


def kernels():
    return [
        LinearKernel(),
        PolynomialKernel(degree=2, offset=1.0),
        PolynomialKernel(degree=3, offset=0.5),
        GaussianKernel(gamma=1.0),
        GaussianKernel(gamma=0.3),
    ]


class TestKernelEval:
    def test_linear_orthogonal(self):
        assert kernel_eval(LinearKernel(), Point((1.0, 0.0)), Point((0.0, 1.0))) == 0.0

    def test_gaussian_same_point(self):
        p = Point((0.3, -1.7, 2.2))
        assert kernel_eval(GaussianKernel(gamma=1.0), p, p) == 1.0

    def test_polynomial_hand_value(self):
        # (dot + offset)^degree with dot = 1*1 + 1*(-1) = 0
        k = PolynomialKernel(degree=2, offset=1.0)
        assert kernel_eval(k, Point((1.0, 1.0)), Point((1.0, -1.0))) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            kernel_eval(LinearKernel(), Point((1.0,)), Point((1.0, 2.0)))

    @settings(max_examples=60, deadline=None)
    @given(
        a=st.lists(finite_floats, min_size=1, max_size=4),
        b=st.lists(finite_floats, min_size=1, max_size=4),
        which=st.integers(min_value=0, max_value=4),
    )
    def test_symmetry_exact(self, a, b, which):
        if len(a) != len(b):
            b = (b * len(a))[: len(a)]
        k = kernels()[which]
        assert kernel_eval(k, Point(tuple(a)), Point(tuple(b))) == kernel_eval(
            k, Point(tuple(b)), Point(tuple(a))
        )


class TestGram:
    def test_orthonormal_identity(self):
        g = gram(LinearKernel(), [Point((1.0, 0.0)), Point((0.0, 1.0))], [Point((1.0, 0.0)), Point((0.0, 1.0))])
        assert np.array_equal(g.entries, np.eye(2))

    def test_single_gaussian(self):
        p = [Point((0.4, 0.5))]
        g = gram(GaussianKernel(gamma=2.0), p, p)
        assert g.entries.shape == (1, 1) and g.entries[0, 0] == 1.0

    def test_rect_hand_values(self):
        g = gram(LinearKernel(), [Point((1.0, 0.0))], [Point((2.0, 0.0)), Point((0.0, 3.0))])
        assert np.array_equal(g.entries, np.array([[2.0, 0.0]]))

    def test_mismatched_dims_rejected(self):
        with pytest.raises(InvalidInputError):
            gram(LinearKernel(), [Point((1.0,))], [Point((1.0, 2.0))])

    @pytest.mark.parametrize("kernel", kernels())
    def test_self_gram_symmetric_psd(self, kernel):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n, d = int(rng.integers(2, 12)), int(rng.integers(1, 5))
            pts = rng.uniform(-2, 2, (n, d))
            if np.unique(pts, axis=0).shape[0] != n:
                continue
            k = kernel_matrix(kernel, pts, pts)
            assert float(np.max(np.abs(k - k.T))) <= 1e-12
            w = np.linalg.eigvalsh(k)
            assert w[0] >= -1e-10 * max(w[-1], 0.0)


class TestDataset:
    def test_rejects_bad_classification_labels(self):
        with pytest.raises(InvalidInputError):
            Dataset(points=np.array([[1.0]]), labels=np.array([0.5]), task=Task.CLASSIFICATION)

    def test_rejects_empty(self):
        with pytest.raises(InvalidInputError):
            Dataset(points=np.zeros((0, 2)), labels=np.zeros(0), task=Task.REGRESSION)

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidInputError):
            Dataset(points=np.array([[np.nan]]), labels=np.array([1.0]), task=Task.REGRESSION)

    def test_immutable(self):
        d = Dataset(points=np.array([[1.0]]), labels=np.array([2.0]), task=Task.REGRESSION)
        with pytest.raises(ValueError):
            d.points[0, 0] = 3.0


class TestSplit:
    def _data(self, n):
        return Dataset(
            points=np.arange(n, dtype=float)[:, None],
            labels=np.arange(n, dtype=float),
            task=Task.REGRESSION,
        )

    def test_basic_sizes(self):
        pair = split_by_indices(self._data(3), {0, 1})
        assert len(pair.s_in) == 2 and len(pair.s_out) == 1

    def test_empty_complement_rejected(self):
        with pytest.raises(InvalidInputError):
            split_by_indices(self._data(2), {0, 1})

    def test_out_of_range_rejected(self):
        with pytest.raises(InvalidInputError):
            split_by_indices(self._data(3), {0, 5})

    def test_order_preserved(self):
        pair = split_by_indices(self._data(4), {1, 3})
        assert pair.s_in.labels.tolist() == [1.0, 3.0]
        assert pair.s_out.labels.tolist() == [0.0, 2.0]

    @settings(max_examples=50, deadline=None)
    @given(st.data())
    def test_partition_property(self, data):
        n = data.draw(st.integers(min_value=2, max_value=12))
        k = data.draw(st.integers(min_value=1, max_value=n - 1))
        idx = data.draw(st.permutations(range(n))).copy()[:k]
        pair = split_by_indices(self._data(n), idx)
        assert len(pair.s_in) + len(pair.s_out) == n
        merged = sorted(pair.s_in.labels.tolist() + pair.s_out.labels.tolist())
        assert merged == list(range(n))


class TestCsv:
    def test_basic_parse(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("1.0,0.0,2.0\n")
        d = load_csv(path, Task.REGRESSION)
        assert d.dim == 2 and len(d) == 1
        assert d.points.tolist() == [[1.0, 0.0]] and d.labels.tolist() == [2.0]

    def test_classification_label_validation(self, tmp_path):
        path = tmp_path / "b.csv"
        path.write_text("1,0,0.5\n")
        with pytest.raises(InvalidInputError, match="row 1"):
            load_csv(path, Task.CLASSIFICATION)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("")
        with pytest.raises(InvalidInputError, match="nonempty"):
            load_csv(path, Task.REGRESSION)

    def test_bad_row_number_reported(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1,2\n3,oops\n")
        with pytest.raises(InvalidInputError, match="row 2"):
            load_csv(path, Task.REGRESSION)

    def test_header_flag(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("x,y\n1,2\n")
        d = load_csv(path, Task.REGRESSION, has_header=True)
        assert len(d) == 1

    @settings(max_examples=30, deadline=None)
    @given(
        rows=st.lists(
            st.tuples(finite_floats, finite_floats, st.sampled_from([-1.0, 1.0])),
            min_size=1,
            max_size=8,
        )
    )
    def test_round_trip(self, rows, tmp_path_factory):
        tmp = tmp_path_factory.mktemp("csv") / "rt.csv"
        d = Dataset(
            points=np.array([r[:2] for r in rows]),
            labels=np.array([r[2] for r in rows]),
            task=Task.CLASSIFICATION,
        )
        save_csv(d, tmp)
        assert load_csv(tmp, Task.CLASSIFICATION) == d

    def test_round_trip_awkward_floats(self, tmp_path):
        vals = [math.pi, 1e-300, -2.5000000000000004, 3.0, 1 / 3]
        d = Dataset(
            points=np.array(vals)[:, None],
            labels=np.array([v * 7 for v in vals]),
            task=Task.REGRESSION,
        )
        path = tmp_path / "f.csv"
        save_csv(d, path)
        assert load_csv(path, Task.REGRESSION) == d
