"""Datasets, splits, kernels, and Gram-matrix assembly.

Everything here is immutable after construction (arrays are marked
read-only), so values can move freely between threads. Operations are pure.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InvalidInputError


class Task(enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


@dataclass(frozen=True)
class Point:
    """A covariate: an ordered tuple of finite feature values."""

    coords: tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if len(coords) < 1:
            raise InvalidInputError("a point needs at least one coordinate")
        if not all(np.isfinite(coords)):
            raise InvalidInputError("point coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)


@dataclass(frozen=True)
class LabeledExample:
    x: Point
    y: float

    def __post_init__(self):
        y = float(self.y)
        if not np.isfinite(y):
            raise InvalidInputError("label must be finite")
        object.__setattr__(self, "y", y)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered sample of labeled points sharing one dimension.

    ``points`` is (n, d), ``labels`` is (n,). Classification labels are
    validated to be exactly +/-1 so the same type serves both regression and
    margin classification.
    """

    points: np.ndarray
    labels: np.ndarray
    task: Task

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        lab = np.asarray(self.labels, dtype=float)
        if pts.ndim != 2:
            raise InvalidInputError(f"points must be a 2-d array, got shape {pts.shape}")
        if pts.shape[0] == 0:
            raise InvalidInputError("dataset must be nonempty")
        if pts.shape[1] < 1:
            raise InvalidInputError("points need at least one feature")
        if lab.shape != (pts.shape[0],):
            raise InvalidInputError("labels must be a vector matching the number of points")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(lab)):
            raise InvalidInputError("points and labels must be finite")
        if self.task is Task.CLASSIFICATION and not np.all(np.abs(lab) == 1.0):
            bad = int(np.argmax(np.abs(lab) != 1.0))
            raise InvalidInputError(
                f"classification labels must be exactly +/-1; example {bad} has y={lab[bad]}"
            )
        object.__setattr__(self, "points", _freeze(pts))
        object.__setattr__(self, "labels", _freeze(lab))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def examples(self) -> list[LabeledExample]:
        return [
            LabeledExample(Point(tuple(p)), float(y))
            for p, y in zip(self.points, self.labels)
        ]

    @classmethod
    def from_examples(cls, examples: Iterable[LabeledExample], task: Task) -> "Dataset":
        examples = list(examples)
        if not examples:
            raise InvalidInputError("dataset must be nonempty")
        dims = {e.x.dim for e in examples}
        if len(dims) != 1:
            raise InvalidInputError(f"all points must share one dimension, saw {sorted(dims)}")
        pts = np.array([e.x.coords for e in examples], dtype=float)
        lab = np.array([e.y for e in examples], dtype=float)
        return cls(points=pts, labels=lab, task=task)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.task is other.task
            and self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class SplitPair:
    """An in-sample/out-sample pair with matching dimension and task."""

    s_in: Dataset
    s_out: Dataset

    def __post_init__(self):
        if self.s_in.dim != self.s_out.dim:
            raise InvalidInputError("split halves must share one dimension")
        if self.s_in.task is not self.s_out.task:
            raise InvalidInputError("split halves must share one task")

    def combined(self) -> Dataset:
        """The union sample, in-sample examples first, original order kept."""
        return Dataset(
            points=np.vstack([self.s_in.points, self.s_out.points]),
            labels=np.concatenate([self.s_in.labels, self.s_out.labels]),
            task=self.s_in.task,
        )


def split_by_indices(d: Dataset, in_indices: Iterable[int]) -> SplitPair:
    """Split a dataset into (selected, complement), both in original order."""
    idx = sorted(set(int(i) for i in in_indices))
    n = len(d)
    if not idx:
        raise InvalidInputError("in_indices must be nonempty")
    if idx[0] < 0 or idx[-1] >= n:
        raise InvalidInputError(f"index out of range for dataset of size {n}")
    if len(idx) == n:
        raise InvalidInputError("in_indices must leave a nonempty complement")
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    s_in = Dataset(points=d.points[mask], labels=d.labels[mask], task=d.task)
    s_out = Dataset(points=d.points[~mask], labels=d.labels[~mask], task=d.task)
    return SplitPair(s_in=s_in, s_out=s_out)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearKernel:
    def __post_init__(self):
        pass


@dataclass(frozen=True)
class PolynomialKernel:
    degree: int
    offset: float = 0.0

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 1:
            raise InvalidInputError("polynomial degree must be a positive integer")
        if self.offset < 0:
            raise InvalidInputError("polynomial offset must be nonnegative")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "offset", float(self.offset))


@dataclass(frozen=True)
class GaussianKernel:
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidInputError("gaussian gamma must be positive")
        object.__setattr__(self, "gamma", float(self.gamma))


KernelSpec = Union[LinearKernel, PolynomialKernel, GaussianKernel]


def kernel_to_dict(kernel: KernelSpec) -> dict:
    if isinstance(kernel, LinearKernel):
        return {"kind": "linear"}
    if isinstance(kernel, PolynomialKernel):
        return {"kind": "polynomial", "degree": kernel.degree, "offset": kernel.offset}
    if isinstance(kernel, GaussianKernel):
        return {"kind": "gaussian", "gamma": kernel.gamma}
    raise InvalidInputError(f"unknown kernel {kernel!r}")


def kernel_from_dict(d: dict) -> KernelSpec:
    kind = d.get("kind")
    if kind == "linear":
        return LinearKernel()
    if kind == "polynomial":
        return PolynomialKernel(degree=d["degree"], offset=d.get("offset", 0.0))
    if kind == "gaussian":
        return GaussianKernel(gamma=d["gamma"])
    raise InvalidInputError(f"unknown kernel kind {kind!r}")


def _point_array(p) -> np.ndarray:
    if isinstance(p, Point):
        return p.as_array()
    a = np.asarray(p, dtype=float)
    if a.ndim != 1:
        raise InvalidInputError(f"expected a single point, got shape {a.shape}")
    return a


def kernel_eval(kernel: KernelSpec, a, b) -> float:
    """K(a, b) for a pair of points; symmetric in (a, b) bit for bit."""
    av, bv = _point_array(a), _point_array(b)
    if av.shape != bv.shape:
        raise InvalidInputError(f"dimension mismatch: {av.shape[0]} vs {bv.shape[0]}")
    if isinstance(kernel, LinearKernel):
        return float(av @ bv)
    if isinstance(kernel, PolynomialKernel):
        return float((av @ bv + kernel.offset) ** kernel.degree)
    if isinstance(kernel, GaussianKernel):
        return float(np.exp(-kernel.gamma * np.sum((av - bv) ** 2)))
    raise InvalidInputError(f"unknown kernel {kernel!r}")


def _points_matrix(points) -> np.ndarray:
    if isinstance(points, np.ndarray) and points.ndim == 2:
        return np.asarray(points, dtype=float)
    rows = [_point_array(p) for p in points]
    if not rows:
        raise InvalidInputError("point list must be nonempty")
    dims = {r.shape[0] for r in rows}
    if len(dims) != 1:
        raise InvalidInputError(f"all points must share one dimension, saw {sorted(dims)}")
    return np.array(rows, dtype=float)


def kernel_matrix(kernel: KernelSpec, rows, cols) -> np.ndarray:
    """Dense kernel matrix K[i, j] = K(rows[i], cols[j]) as a plain array."""
    x = _points_matrix(rows)
    z = _points_matrix(cols)
    if x.shape[1] != z.shape[1]:
        raise InvalidInputError(f"dimension mismatch: {x.shape[1]} vs {z.shape[1]}")
    if isinstance(kernel, (LinearKernel, PolynomialKernel)):
        dots = x @ z.T
        if x is z or (x.shape == z.shape and np.array_equal(x, z)):
            dots = (dots + dots.T) / 2.0  # BLAS order differences break exact symmetry
        if isinstance(kernel, LinearKernel):
            return dots
        return (dots + kernel.offset) ** kernel.degree
    if isinstance(kernel, GaussianKernel):
        # Pairwise differences keep self-distances exactly zero and the block
        # exactly symmetric, which the Gram invariants rely on.
        sq = np.sum((x[:, None, :] - z[None, :, :]) ** 2, axis=2)
        return np.exp(-kernel.gamma * sq)
    raise InvalidInputError(f"unknown kernel {kernel!r}")


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """A dense kernel block together with the point lists that generated it."""

    entries: np.ndarray
    row_points: np.ndarray
    col_points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _freeze(self.entries))
        object.__setattr__(self, "row_points", _freeze(self.row_points))
        object.__setattr__(self, "col_points", _freeze(self.col_points))

    @property
    def is_self(self) -> bool:
        return self.row_points.shape == self.col_points.shape and np.array_equal(
            self.row_points, self.col_points
        )


def gram(kernel: KernelSpec, rows, cols) -> GramMatrix:
    x = _points_matrix(rows)
    z = _points_matrix(cols)
    return GramMatrix(entries=kernel_matrix(kernel, x, z), row_points=x, col_points=z)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def load_csv(path, task: Task, has_header: bool = False) -> Dataset:
    """Load a dataset from a CSV of d feature columns followed by one label.

    Parse failures report the 1-based row number. Classification labels must
    be exactly +/-1.
    """
    rows: list[list[str]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for raw in reader:
            if raw and any(field.strip() for field in raw):
                rows.append(raw)
    if has_header and rows:
        rows = rows[1:]
    if not rows:
        raise InvalidInputError(f"{path}: dataset must be nonempty")
    width = len(rows[0])
    if width < 2:
        raise InvalidInputError(f"{path}: row 1 needs at least one feature and one label")
    pts, labels = [], []
    for i, raw in enumerate(rows, start=1 + int(has_header)):
        if len(raw) != width:
            raise InvalidInputError(f"{path}: row {i} has {len(raw)} fields, expected {width}")
        try:
            vals = [float(field) for field in raw]
        except ValueError as exc:
            raise InvalidInputError(f"{path}: row {i}: {exc}") from exc
        if not all(np.isfinite(vals)):
            raise InvalidInputError(f"{path}: row {i}: values must be finite")
        if task is Task.CLASSIFICATION and vals[-1] not in (-1.0, 1.0):
            raise InvalidInputError(
                f"{path}: row {i}: classification label must be -1 or 1, got {vals[-1]}"
            )
        pts.append(vals[:-1])
        labels.append(vals[-1])
    return Dataset(points=np.array(pts, dtype=float), labels=np.array(labels), task=task)


def save_csv(dataset: Dataset, path) -> None:
    """Write a dataset back out in the load_csv format (exact float round trip)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for p, y in zip(dataset.points, dataset.labels):
            writer.writerow([repr(float(v)) for v in p] + [repr(float(y))])
