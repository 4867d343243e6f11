from __future__ import annotations
from noc_sentinel.config import DEFAULT_KL_EPSILON
from noc_sentinel.errors import InvalidArgumentError
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Sequence
from scipy.spatial.distance import cdist
from scipy.stats import entropy
import numpy as np
import math


def _as_array(series: Any) -> np.ndarray:
    samples = getattr(series, "samples", series)
    return np.asarray(samples, dtype=np.float64).reshape(-1)


def _same_length(s: np.ndarray, z: np.ndarray) -> None:
    if len(s) != len(z):
        raise InvalidArgumentError(f"lockstep distance needs equal lengths, got {len(s)} and {len(z)}")
    if len(s) == 0:
        raise InvalidArgumentError("cannot compare empty series")


def minkowski(s: Any, z: Any, p: float = 2.0) -> float:
    """(sum |s - z|^p)^(1/p); p = inf gives the Chebyshev distance."""
    if not (p >= 1):
        raise InvalidArgumentError(f"Minkowski order must be >= 1, got {p}")
    s, z = _as_array(s), _as_array(z)
    _same_length(s, z)
    return float(np.linalg.norm(s - z, ord=p))


def kullback_leibler(s: Any, z: Any, epsilon: float = DEFAULT_KL_EPSILON) -> float:
    """
    KL divergence of s from z after both are normalized to sum 1.

    When either vector has an empty bin, `epsilon` is added to every bin of
    both before renormalizing.
    """
    s, z = _as_array(s), _as_array(z)
    _same_length(s, z)
    if (s < 0).any() or (z < 0).any():
        raise InvalidArgumentError("KL inputs must be non-negative")
    if s.sum() == 0 or z.sum() == 0:
        raise InvalidArgumentError("KL inputs must not be all zero")
    s = s / s.sum()
    z = z / z.sum()
    if (s == 0).any() or (z == 0).any():
        s = (s + epsilon) / (s + epsilon).sum()
        z = (z + epsilon) / (z + epsilon).sum()
    if (s <= 0).any() or (z <= 0).any():
        raise InvalidArgumentError("KL inputs have empty bins; use epsilon > 0")
    return float(entropy(s, z))


@dataclass(frozen=True)
class DtwMatrix:
    """Accumulated cost with a sentinel row and column: cost[0][0] = 0, the rest of both edges +inf."""
    cost: np.ndarray

    @property
    def distance(self) -> float:
        return float(self.cost[-1, -1])

    @property
    def interior(self) -> np.ndarray:
        return self.cost[1:, 1:]


def _dtw_rows(a: Sequence[float], b: Sequence[float]):
    """Yield the accumulated-cost rows one at a time, column 0 held at infinity."""
    m = len(b)
    prev = [0.0] + [math.inf] * m
    for ai in a:
        row = [math.inf] * (m + 1)
        for j in range(1, m + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if row[j - 1] < best:
                best = row[j - 1]
            row[j] = abs(ai - b[j - 1]) + best
        yield row
        prev = row


def dtw_distance(a: Any, b: Any) -> float:
    a, b = _as_array(a).tolist(), _as_array(b).tolist()
    if not a or not b:
        raise InvalidArgumentError("DTW needs non-empty series")
    row = None
    for row in _dtw_rows(a, b):
        pass
    return row[-1]


def dtw(a: Any, b: Any) -> tuple[float, DtwMatrix]:
    """Unconstrained DTW with absolute-difference cost."""
    a, b = _as_array(a).tolist(), _as_array(b).tolist()
    if not a or not b:
        raise InvalidArgumentError("DTW needs non-empty series")
    cost = np.full((len(a) + 1, len(b) + 1), np.inf)
    cost[0, 0] = 0.0
    for i, row in enumerate(_dtw_rows(a, b), start=1):
        cost[i] = row
    matrix = DtwMatrix(cost)
    return matrix.distance, matrix


WarpingPath = list[tuple[int, int]]


def dtw_path(matrix: DtwMatrix) -> WarpingPath:
    """
    Backtrack the optimal warping path from the last cell.

    Indices are 0-based into the two series: the cell written (1, 1) in the
    1-based matrix notation comes back as (0, 0), and (n, m) as (n-1, m-1).
    Among equal predecessors the diagonal wins, then (i-1, j), then (i, j-1).
    """
    cost = np.asarray(matrix.cost)
    if cost.ndim != 2 or cost.shape[0] < 2 or cost.shape[1] < 2:
        raise InvalidArgumentError("DTW matrix needs at least one interior cell")
    if cost[0, 0] != 0 or not np.isinf(cost[0, 1:]).all() or not np.isinf(cost[1:, 0]).all():
        raise InvalidArgumentError("DTW matrix is missing its sentinel row/column")
    if not np.isfinite(cost[1:, 1:]).all():
        raise InvalidArgumentError("DTW matrix has non-finite interior cells")

    i, j = cost.shape[0] - 1, cost.shape[1] - 1
    path = [(i - 1, j - 1)]
    while (i, j) != (1, 1):
        candidates = ((i - 1, j - 1), (i - 1, j), (i, j - 1))
        best = candidates[0]
        for c in candidates[1:]:
            if cost[c] < cost[best]:
                best = c
        i, j = best
        path.append((i - 1, j - 1))
    path.reverse()
    return path


def path_cost(a: Any, b: Any, path: WarpingPath) -> float:
    a, b = _as_array(a), _as_array(b)
    return float(sum(abs(a[i] - b[j]) for i, j in path))


def align(b: Any, path: WarpingPath) -> np.ndarray:
    """
    Re-index `b` along the path's first coordinate.

    A model index matched by several cells of `b` (a horizontal run) is a
    deletion and contributes nothing; a `b` sample matched by several model
    indices (a vertical run) is repeated.
    """
    b = _as_array(b)
    if not path:
        raise InvalidArgumentError("empty warping path")
    for (i0, j0), (i1, j1) in zip(path, path[1:]):
        if (i1 - i0, j1 - j0) not in ((1, 0), (0, 1), (1, 1)):
            raise InvalidArgumentError(f"illegal warping step {(i0, j0)} -> {(i1, j1)}")
    if path[0] != (0, 0):
        raise InvalidArgumentError("warping path must start at (0, 0)")
    if any(not 0 <= j < len(b) for _, j in path):
        raise InvalidArgumentError("warping path indexes past the end of the series")

    by_model: dict[int, list[int]] = {}
    for i, j in path:
        by_model.setdefault(i, []).append(j)
    return np.array([b[js[0]] for _, js in sorted(by_model.items()) if len(js) == 1])


@dataclass(frozen=True)
class Metric:
    """A named distance: Minkowski of order p, Kullback-Leibler, or DTW."""
    name: str
    p: float = 2.0
    epsilon: float = DEFAULT_KL_EPSILON

    def __post_init__(self):
        if self.name not in ("minkowski", "kl", "dtw"):
            raise InvalidArgumentError(f"unknown metric {self.name!r}")
        if self.name == "minkowski" and not self.p >= 1:
            raise InvalidArgumentError(f"Minkowski order must be >= 1, got {self.p}")

    @classmethod
    def parse(cls, text: str) -> Metric:
        key = text.strip().lower()
        if key in _NAMED:
            return _NAMED[key]
        if key.startswith("minkowski:"):
            try:
                return cls("minkowski", float(key.split(":", 1)[1]))
            except ValueError as e:
                raise InvalidArgumentError(f"bad Minkowski order in {text!r}") from e
        raise InvalidArgumentError(f"unknown metric {text!r}")

    def __str__(self) -> str:
        for key, metric in _NAMED.items():
            if metric == self:
                return key
        if self.name == "minkowski":
            return f"minkowski:{self.p:g}"
        return self.name

    @property
    def elastic(self) -> bool:
        return self.name == "dtw"

    @property
    def symmetric(self) -> bool:
        return self.name != "kl"

    def __call__(self, a: Any, b: Any) -> float:
        if self.name == "minkowski":
            return minkowski(a, b, self.p)
        if self.name == "kl":
            return kullback_leibler(a, b, self.epsilon)
        return dtw_distance(a, b)


MANHATTAN = Metric("minkowski", 1.0)
EUCLIDEAN = Metric("minkowski", 2.0)
CHEBYSHEV = Metric("minkowski", math.inf)
KL = Metric("kl")
DTW = Metric("dtw")

_NAMED = {
    "manhattan": MANHATTAN,
    "euclidean": EUCLIDEAN,
    "chebyshev": CHEBYSHEV,
    "kl": KL,
    "dtw": DTW,
}

_CDIST_NAMES = {1.0: "cityblock", 2.0: "euclidean", math.inf: "chebyshev"}


def _row(args: tuple[Metric, np.ndarray, np.ndarray, int]) -> np.ndarray:
    """Worker task: one row of a pairwise matrix, zero left of `start`."""
    metric, x, ys, start = args
    out = np.zeros(len(ys))
    for j in range(start, len(ys)):
        out[j] = metric(x, ys[j])
    return out


def pairwise(X: Any, Y: Any | None = None, metric: Metric = EUCLIDEAN, workers: int = 1) -> np.ndarray:
    """
    Distance matrix D[i, j] = metric(X[i], Y[j]); Y defaults to X.

    Rows are computed independently and gathered in order, so the result
    does not depend on `workers`.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    same = Y is None
    Y = X if same else np.atleast_2d(np.asarray(Y, dtype=np.float64))

    if metric.name == "minkowski":
        _same_length(X[0], Y[0])
        name = _CDIST_NAMES.get(metric.p)
        if name is None:
            return cdist(X, Y, "minkowski", p=metric.p)
        return cdist(X, Y, name)

    # symmetric self-distances only need the upper triangle
    half = same and metric.symmetric
    jobs = [(metric, X[i], Y, i + 1 if half else 0) for i in range(len(X))]
    if workers > 1 and len(X) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_row, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        rows = [_row(job) for job in jobs]
    D = np.vstack(rows)
    if half:
        D = np.triu(D, 1)
        D = D + D.T
    return D
