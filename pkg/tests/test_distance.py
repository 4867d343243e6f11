from noc_sentinel.analysis.distance import (
    CHEBYSHEV,
    DTW,
    EUCLIDEAN,
    KL,
    MANHATTAN,
    DtwMatrix,
    Metric,
    align,
    dtw,
    dtw_distance,
    dtw_path,
    kullback_leibler,
    minkowski,
    pairwise,
    path_cost,
)
from noc_sentinel.errors import InvalidArgumentError
from itertools import product
import functools
import numpy as np
import math
import pytest

A = [0, 2, 4, 6, 9, 12]
B = [0, 0, 0, 2, 4, 6, 9]


def test_dtw_reference_pair():
    d, matrix = dtw(A, B)
    assert d == 3
    assert dtw_distance(A, B) == 3
    path = dtw_path(matrix)
    assert path == [(0, 0), (0, 1), (0, 2), (1, 3), (2, 4), (3, 5), (4, 6), (5, 6)]
    assert path_cost(A, B, path) == d
    np.testing.assert_array_equal(align(B, path), [2, 4, 6, 9, 9])


INF = math.inf
# accumulated cost for A (rows) against B (columns), sentinel row and column included
REFERENCE_COST = [
    [0, INF, INF, INF, INF, INF, INF, INF],
    [INF, 0, 0, 0, 2, 6, 12, 21],
    [INF, 2, 2, 2, 0, 2, 6, 13],
    [INF, 6, 6, 6, 2, 0, 2, 7],
    [INF, 12, 12, 12, 6, 2, 0, 3],
    [INF, 21, 21, 21, 13, 7, 3, 0],
    [INF, 33, 33, 33, 23, 15, 9, 3],
]


def test_dtw_reference_matrix_cell_by_cell():
    _, matrix = dtw(A, B)
    assert matrix.cost.shape == (len(A) + 1, len(B) + 1)
    for i, row in enumerate(REFERENCE_COST):
        for j, expected in enumerate(row):
            assert matrix.cost[i, j] == expected, (i, j)


def test_dtw_path_is_zero_based():
    path = dtw_path(dtw(A, B)[1])
    assert path[0] == (0, 0)
    assert path[-1] == (len(A) - 1, len(B) - 1)


def test_dtw_matrix_sentinels():
    _, matrix = dtw([1, 2], [1, 2, 3])
    assert matrix.cost.shape == (3, 4)
    assert matrix.cost[0, 0] == 0
    assert np.isinf(matrix.cost[0, 1:]).all() and np.isinf(matrix.cost[1:, 0]).all()
    assert matrix.interior.shape == (2, 3)


def _all_paths(n: int, m: int):
    """Every monotone path from (0, 0) to (n-1, m-1)."""
    def walk(i, j):
        if (i, j) == (n - 1, m - 1):
            yield [(i, j)]
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            if i + di < n and j + dj < m:
                for rest in walk(i + di, j + dj):
                    yield [(i, j)] + rest
    yield from walk(0, 0)


@functools.cache
def _path_table(n: int, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All monotone paths of an n x m grid as padded index arrays plus a validity mask."""
    paths = list(_all_paths(n, m))
    width = max(len(p) for p in paths)
    rows = np.zeros((len(paths), width), dtype=np.int64)
    cols = np.zeros((len(paths), width), dtype=np.int64)
    mask = np.zeros((len(paths), width))
    for k, p in enumerate(paths):
        rows[k, :len(p)] = [i for i, _ in p]
        cols[k, :len(p)] = [j for _, j in p]
        mask[k, :len(p)] = 1.0
    return rows, cols, mask


def _brute_force_dtw(a: np.ndarray, b: np.ndarray) -> float:
    rows, cols, mask = _path_table(len(a), len(b))
    local = np.abs(a[:, None] - b[None, :])
    return float((local[rows, cols] * mask).sum(axis=1).min())


def _all_series(max_len: int, values: int) -> list[np.ndarray]:
    return [np.array(s, dtype=float) for n in range(1, max_len + 1) for s in product(range(values), repeat=n)]


def test_dtw_matches_brute_force_on_every_short_pair():
    # every pair of series of length <= 3 over the values 0..4
    series = _all_series(3, 5)
    for a in series:
        for b in series:
            assert dtw_distance(a, b) == _brute_force_dtw(a, b), (a, b)


def test_dtw_matches_brute_force_up_to_length_six():
    rng = np.random.default_rng(2024)
    for _ in range(15_000):
        a = rng.integers(0, 5, size=rng.integers(1, 7)).astype(float)
        b = rng.integers(0, 5, size=rng.integers(1, 7)).astype(float)
        d, matrix = dtw(a, b)
        assert d == _brute_force_dtw(a, b), (a, b)
        assert path_cost(a, b, dtw_path(matrix)) == d


def test_dtw_properties():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        n = int(rng.integers(1, 12))
        a, b = rng.random(n), rng.random(int(rng.integers(1, 12)))
        assert dtw_distance(a, a) == 0
        assert dtw_distance(a, b) == pytest.approx(dtw_distance(b, a), rel=1e-9)
        c = rng.random(n)
        assert dtw_distance(a, c) <= MANHATTAN(a, c) * (1 + 1e-9)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_minkowski_triangle_inequality(p):
    rng = np.random.default_rng(p)
    for _ in range(1000):
        n = int(rng.integers(1, 16))
        x, y, z = rng.normal(size=(3, n)) * rng.uniform(0.1, 10)
        assert minkowski(x, z, p) <= (minkowski(x, y, p) + minkowski(y, z, p)) * (1 + 1e-9)


def test_kl_is_never_negative():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(1, 16))
        s, z = rng.random((2, n)) + 1e-6
        # sparse inputs exercise the smoothing path
        s[rng.random(n) < 0.2] = 0.0
        if s.sum() == 0:
            s[0] = 1.0
        assert kullback_leibler(s, z) >= -1e-12


def test_dtw_path_validates_matrix():
    cost = np.zeros((3, 3))
    with pytest.raises(InvalidArgumentError):
        dtw_path(DtwMatrix(cost))
    with pytest.raises(InvalidArgumentError):
        dtw_path(DtwMatrix(np.zeros((1, 4))))


def test_align_validates_path():
    with pytest.raises(InvalidArgumentError):
        align([1, 2, 3], [(0, 0), (2, 2)])
    with pytest.raises(InvalidArgumentError):
        align([1, 2, 3], [(0, 1), (1, 2)])
    with pytest.raises(InvalidArgumentError):
        align([1, 2], [(0, 0), (1, 1), (2, 2)])
    with pytest.raises(InvalidArgumentError):
        align([1], [])


def test_minkowski_family():
    s, z = [0, 3, 1], [4, 0, 1]
    assert minkowski(s, z, 1) == 7
    assert minkowski(s, z, 2) == 5
    assert minkowski(s, z, math.inf) == 4
    assert CHEBYSHEV(s, z) == 4
    with pytest.raises(InvalidArgumentError):
        minkowski(s, z, 0.5)
    with pytest.raises(InvalidArgumentError):
        minkowski([1, 2], [1, 2, 3])


def test_kl_divergence():
    assert kullback_leibler([1, 1], [1, 1]) == 0
    # scale-free: both sides are normalized first
    assert kullback_leibler([2, 6], [1, 1]) == pytest.approx(0.25 * math.log(0.5) + 0.75 * math.log(1.5))
    assert kullback_leibler([1, 3], [3, 1]) == pytest.approx(kullback_leibler([3, 1], [1, 3]))
    assert kullback_leibler([1, 2], [2, 1]) > 0


def test_kl_smooths_empty_bins():
    d = kullback_leibler([1, 0], [0, 1], epsilon=1e-3)
    assert math.isfinite(d) and d > 0
    with pytest.raises(InvalidArgumentError):
        kullback_leibler([1, 0], [0, 1], epsilon=0.0)


@pytest.mark.parametrize("s,z", [([-1, 2], [1, 1]), ([0, 0], [1, 1])])
def test_kl_rejects_bad_inputs(s, z):
    with pytest.raises(InvalidArgumentError):
        kullback_leibler(s, z)


@pytest.mark.parametrize("text,expected", [
    ("manhattan", MANHATTAN),
    ("Euclidean", EUCLIDEAN),
    ("chebyshev", CHEBYSHEV),
    ("kl", KL),
    ("dtw", DTW),
    ("minkowski:3", Metric("minkowski", 3.0)),
])
def test_metric_parse_and_str(text, expected):
    m = Metric.parse(text)
    assert m == expected
    assert Metric.parse(str(m)) == m


def test_metric_parse_rejects_unknown():
    for text in ("cosine", "minkowski:x", "minkowski:0.5"):
        with pytest.raises(InvalidArgumentError):
            Metric.parse(text)
    assert DTW.elastic and not EUCLIDEAN.elastic
    assert not KL.symmetric and DTW.symmetric


@pytest.mark.parametrize("metric", [MANHATTAN, EUCLIDEAN, CHEBYSHEV, Metric("minkowski", 3.0), KL, DTW])
def test_pairwise_matches_direct_calls(metric):
    rng = np.random.default_rng(2)
    X = rng.random((5, 6)) + 0.1
    Y = rng.random((3, 6)) + 0.1
    D = pairwise(X, Y, metric)
    for i, j in product(range(5), range(3)):
        assert D[i, j] == pytest.approx(metric(X[i], Y[j]))
    S = pairwise(X, metric=metric)
    assert S.shape == (5, 5)
    assert np.allclose(np.diag(S), 0)
    if metric.symmetric:
        np.testing.assert_allclose(S, S.T)


def test_pairwise_worker_count_does_not_change_result():
    rng = np.random.default_rng(3)
    X = rng.random((6, 5))
    np.testing.assert_array_equal(pairwise(X, metric=DTW, workers=1), pairwise(X, metric=DTW, workers=2))
