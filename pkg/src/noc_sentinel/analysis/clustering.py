from __future__ import annotations
from noc_sentinel.analysis.distance import EUCLIDEAN, Metric, pairwise
from noc_sentinel.config import DEFAULT_MAX_ITER, DEFAULT_N_INIT
from noc_sentinel.errors import InvalidArgumentError, UnsupportedMetricError
from dataclasses import dataclass
from enum import Enum
from typing import Any, NamedTuple, Sequence
from loguru import logger
from sklearn.metrics.cluster import pair_confusion_matrix
import numpy as np
import math


@dataclass(frozen=True)
class Clustering:
    """
    Result of one clustering run.

    `centers` holds one series per cluster: pointwise means for k-means,
    the medoid items' series otherwise. `history` is the inertia (k-means)
    or total cost (k-medoids) after every iteration; `merges` is the
    agglomerative merge-distance sequence.
    """
    assignment: np.ndarray
    centers: np.ndarray
    medoids: tuple[int, ...] | None = None
    history: tuple[float, ...] = ()
    merges: tuple[float, ...] = ()
    iterations: int = 0
    converged: bool = True

    @property
    def k(self) -> int:
        return len(self.centers)

    @property
    def objective(self) -> float:
        return self.history[-1] if self.history else 0.0

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cluster)


class Linkage(Enum):
    SINGLE = "single"
    COMPLETE = "complete"
    AVERAGE = "average"


def as_dataset(data: Any) -> np.ndarray:
    """Stack series (arrays or objects with `.samples`) into an (n, w) float matrix."""
    if isinstance(data, np.ndarray):
        X = data.astype(np.float64, copy=False)
    else:
        rows = [np.asarray(getattr(s, "samples", s), dtype=np.float64).reshape(-1) for s in data]
        if not rows:
            raise InvalidArgumentError("dataset is empty")
        if len({len(r) for r in rows}) != 1:
            raise InvalidArgumentError("every item in a dataset needs the same length")
        X = np.vstack(rows)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise InvalidArgumentError(f"dataset must be a non-empty (n, w) matrix, got shape {X.shape}")
    return X


def _weights(weights: Sequence[float] | None, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,) or (w <= 0).any():
        raise InvalidArgumentError("weights must be positive, one per item")
    return w


def _check_k(k: int, n: int) -> None:
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"k must be in [1, {n}], got {k}")


def _init_distinct(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k items drawn uniformly, preferring items whose values differ from those already picked."""
    order = rng.permutation(len(X))
    picks: list[int] = []
    for idx in order:
        if all(not np.array_equal(X[idx], X[p]) for p in picks):
            picks.append(int(idx))
            if len(picks) == k:
                return np.array(picks)
    for idx in order:
        if int(idx) not in picks:
            picks.append(int(idx))
            if len(picks) == k:
                break
    return np.array(picks)


# ------------------ k-means ------------------

def _repair_empty(assign: np.ndarray, D: np.ndarray, X: np.ndarray, centers: np.ndarray, metric: Metric) -> None:
    """Re-seed every empty cluster with the item farthest from its own center."""
    k = len(centers)
    counts = np.bincount(assign, minlength=k)
    rows = np.arange(len(X))
    for c in np.flatnonzero(counts == 0):
        own = D[rows, assign].copy()
        own[counts[assign] < 2] = -np.inf
        far = int(np.argmax(own))
        counts[assign[far]] -= 1
        assign[far] = c
        counts[c] = 1
        centers[c] = X[far]
        D[:, c] = pairwise(X, centers[c:c + 1], metric)[:, 0]


def _kmeans_once(
    X: np.ndarray,
    k: int,
    metric: Metric,
    rng: np.random.Generator,
    max_iter: int,
    tol: float,
    w: np.ndarray,
) -> Clustering:
    centers = X[_init_distinct(X, k, rng)].copy()
    assign: np.ndarray | None = None
    history: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        D = pairwise(X, centers, metric)
        new = np.argmin(D, axis=1)
        _repair_empty(new, D, X, centers, metric)
        if assign is not None and np.array_equal(new, assign):
            converged = True
            break
        assign = new
        previous = centers.copy()
        for c in range(k):
            mask = assign == c
            centers[c] = np.average(X[mask], axis=0, weights=w[mask])
        d = np.array([metric(X[i], centers[assign[i]]) for i in range(len(X))])
        history.append(float(np.sum(w * d * d)))
        if float(np.max(np.abs(centers - previous))) <= tol:
            converged = True
            break
    return Clustering(assign, centers, None, tuple(history), (), it, converged)


def kmeans(
    data: Any,
    k: int,
    metric: Metric = EUCLIDEAN,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = 0.0,
    n_init: int = DEFAULT_N_INIT,
    weights: Sequence[float] | None = None,
) -> Clustering:
    """
    Lloyd-style k-means with pointwise (weighted) means as centers.

    Runs `n_init` seeded restarts and keeps the lowest final inertia,
    earliest restart on ties. Elastic metrics are refused: a pointwise mean
    is not a DTW centroid.
    """
    if metric.elastic:
        raise UnsupportedMetricError("k-means needs a lockstep metric; use k-medoids or agglomerative for DTW")
    X = as_dataset(data)
    _check_k(k, len(X))
    if max_iter < 1 or n_init < 1:
        raise InvalidArgumentError("max_iter and n_init must be >= 1")
    w = _weights(weights, len(X))
    rng = np.random.default_rng(seed)

    best: Clustering | None = None
    for _ in range(n_init):
        run = _kmeans_once(X, k, metric, rng, max_iter, tol, w)
        if best is None or run.objective < best.objective:
            best = run
    assert best is not None
    logger.debug(f"k-means k={k} metric={metric}: inertia={best.objective:.6g} after {best.iterations} iterations")
    return best


# ------------------ k-medoids ------------------

def _medoid_cost(D: np.ndarray, medoids: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, float]:
    """Nearest-medoid assignment and its weighted cost."""
    assign = np.argmin(D[:, medoids], axis=1)
    assign[medoids] = np.arange(len(medoids))
    cost = float(np.sum(w * D[np.arange(len(D)), medoids[assign]]))
    return assign, cost


def _kmedoids_once(
    D: np.ndarray,
    X: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iter: int,
    w: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, list[float], int, bool]:
    medoids = _init_distinct(X, k, rng)
    history: list[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        assign, cost = _medoid_cost(D, medoids, w)
        history.append(cost)
        new = medoids.copy()
        for c in range(k):
            members = np.flatnonzero(assign == c)
            # cost of each member as the medoid: weighted distances from every member to it
            totals = w[members] @ D[np.ix_(members, members)]
            new[c] = members[int(np.argmin(totals))]
        if np.array_equal(new, medoids):
            return medoids, assign, history, it, True
        medoids = new
    assign, cost = _medoid_cost(D, medoids, w)
    if cost < history[-1]:
        history.append(cost)
    return medoids, assign, history, it, False


def kmedoids(
    data: Any,
    k: int,
    metric: Metric = EUCLIDEAN,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    n_init: int = DEFAULT_N_INIT,
    weights: Sequence[float] | None = None,
    workers: int = 1,
    distances: np.ndarray | None = None,
) -> Clustering:
    """
    PAM-style alternation over a precomputed distance matrix.

    Items are assigned to the nearest medoid (each medoid to its own cluster),
    then each medoid moves to the member with the lowest summed distance to
    the rest of its cluster. Any metric is accepted, DTW included.
    """
    X = as_dataset(data)
    n = len(X)
    _check_k(k, n)
    if max_iter < 1 or n_init < 1:
        raise InvalidArgumentError("max_iter and n_init must be >= 1")
    w = _weights(weights, n)
    D = pairwise(X, None, metric, workers) if distances is None else np.asarray(distances, dtype=np.float64)
    if D.shape != (n, n):
        raise InvalidArgumentError(f"distance matrix must be {n}x{n}, got {D.shape}")
    rng = np.random.default_rng(seed)

    best = None
    for _ in range(n_init):
        run = _kmedoids_once(D, X, k, rng, max_iter, w)
        if best is None or run[2][-1] < best[2][-1]:
            best = run
    medoids, assign, history, it, converged = best
    logger.debug(f"k-medoids k={k} metric={metric}: cost={history[-1]:.6g} after {it} iterations")
    return Clustering(assign, X[medoids].copy(), tuple(int(m) for m in medoids), tuple(history), (), it, converged)


# ------------------ agglomerative ------------------

def agglomerative(
    data: Any,
    metric: Metric = EUCLIDEAN,
    linkage: Linkage = Linkage.AVERAGE,
    k_stop: int = 1,
    workers: int = 1,
    distances: np.ndarray | None = None,
) -> Clustering:
    """
    Bottom-up merging of the closest cluster pair until `k_stop` clusters remain.

    Cluster distances follow the Lance-Williams update for the chosen
    linkage. Ties go to the pair with the lowest item indices. Asymmetric
    metrics (KL) are symmetrized by averaging both directions. Cluster ids
    are numbered by each cluster's lowest member; centers are the medoid
    series of every cluster.
    """
    X = as_dataset(data)
    n = len(X)
    _check_k(k_stop, n)
    D = pairwise(X, None, metric, workers) if distances is None else np.asarray(distances, dtype=np.float64)
    if D.shape != (n, n):
        raise InvalidArgumentError(f"distance matrix must be {n}x{n}, got {D.shape}")
    if not metric.symmetric:
        D = (D + D.T) / 2

    M = D.copy()
    np.fill_diagonal(M, np.inf)
    sizes = np.ones(n)
    owner = np.arange(n)
    merges: list[float] = []
    for _ in range(n - k_stop):
        i, j = divmod(int(np.argmin(M)), n)
        if i > j:
            i, j = j, i
        merges.append(float(M[i, j]))
        if linkage is Linkage.SINGLE:
            row = np.minimum(M[i], M[j])
        elif linkage is Linkage.COMPLETE:
            row = np.maximum(M[i], M[j])
        else:
            row = (sizes[i] * M[i] + sizes[j] * M[j]) / (sizes[i] + sizes[j])
        M[i, :] = row
        M[:, i] = row
        M[i, i] = np.inf
        M[j, :] = np.inf
        M[:, j] = np.inf
        sizes[i] += sizes[j]
        owner[owner == j] = i

    reps = sorted(set(owner.tolist()))
    relabel = {r: c for c, r in enumerate(reps)}
    assign = np.array([relabel[o] for o in owner])
    medoids = []
    for c in range(len(reps)):
        members = np.flatnonzero(assign == c)
        totals = D[np.ix_(members, members)].sum(axis=0)
        medoids.append(int(members[int(np.argmin(totals))]))
    return Clustering(assign, X[medoids].copy(), tuple(medoids), (), tuple(merges), n - k_stop, True)


# ------------------ external indices ------------------

@dataclass(frozen=True)
class PairCounts:
    """a: together in both; b: together in G only; c: together in T only; d: apart in both."""
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise InvalidArgumentError("pair counts must be non-negative")

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d


class ExternalIndices(NamedTuple):
    rand: float
    jaccard: float
    folkes_mallows: float


def pair_counts(G: Sequence[Any], T: Sequence[Any]) -> PairCounts:
    G, T = np.asarray(G), np.asarray(T)
    if G.shape != T.shape or G.ndim != 1:
        raise InvalidArgumentError(f"label vectors must have equal length, got {G.shape} and {T.shape}")
    if len(G) < 2:
        raise InvalidArgumentError("pair counts need at least two items")
    # ordered-pair counts; every unordered pair appears twice
    C = pair_confusion_matrix(G, T)
    return PairCounts(int(C[1, 1]) // 2, int(C[1, 0]) // 2, int(C[0, 1]) // 2, int(C[0, 0]) // 2)


def external_indices(counts: PairCounts) -> ExternalIndices:
    a, b, c, d = counts.a, counts.b, counts.c, counts.d
    if counts.total < 1:
        raise InvalidArgumentError("pair counts are empty")
    rand = (a + d) / counts.total
    jaccard = 1.0 if a + b + c == 0 else a / (a + b + c)
    if a == 0:
        fm = 0.0
    elif b == 0 and c == 0:
        fm = 1.0
    else:
        fm = math.sqrt((a / (a + b)) * (a / (a + c)))
    return ExternalIndices(rand, jaccard, fm)


def score(G: Sequence[Any], T: Sequence[Any]) -> ExternalIndices:
    return external_indices(pair_counts(G, T))


# ------------------ dispatch ------------------

class Algorithm(Enum):
    KMEANS = "kmeans"
    KMEDOIDS = "kmedoids"
    AGGLOMERATIVE = "agglomerative"

    @classmethod
    def parse(cls, text: str) -> Algorithm:
        try:
            return cls(text.strip().lower().replace("-", ""))
        except ValueError as e:
            raise InvalidArgumentError(f"unknown clustering algorithm {text!r}") from e


def cluster(
    data: Any,
    algorithm: Algorithm,
    k: int,
    metric: Metric = EUCLIDEAN,
    seed: int = 0,
    weights: Sequence[float] | None = None,
    linkage: Linkage = Linkage.AVERAGE,
    n_init: int = DEFAULT_N_INIT,
    max_iter: int = DEFAULT_MAX_ITER,
    workers: int = 1,
) -> Clustering:
    """Run one of the three algorithms with a shared signature. Agglomerative ignores weights and seed."""
    if algorithm is Algorithm.KMEANS:
        return kmeans(data, k, metric, seed, max_iter, 0.0, n_init, weights)
    if algorithm is Algorithm.KMEDOIDS:
        return kmedoids(data, k, metric, seed, max_iter, n_init, weights, workers)
    return agglomerative(data, metric, linkage, k, workers)
