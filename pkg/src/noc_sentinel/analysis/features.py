from __future__ import annotations
from noc_sentinel.config import DEFAULT_HIST_BINS
from noc_sentinel.errors import InvalidArgumentError
from dataclasses import dataclass
from typing import Any
from scipy.stats import entropy
import numpy as np


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class ProbDist:
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        if p.ndim != 1 or len(p) == 0:
            raise InvalidArgumentError("a distribution needs at least one outcome")
        if (p < 0).any() or (p > 1).any() or abs(p.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("probabilities must lie in [0, 1] and sum to 1")
        object.__setattr__(self, "probabilities", p)


def _dist(d: ProbDist | Any) -> np.ndarray:
    return d.probabilities if isinstance(d, ProbDist) else ProbDist(d).probabilities


def histogram(series: Any, bins: int = DEFAULT_HIST_BINS) -> Histogram:
    """Uniform bins over [min, max]; the maximum lands in the last bin."""
    x = np.asarray(getattr(series, "samples", series), dtype=np.float64).reshape(-1)
    if len(x) == 0:
        raise InvalidArgumentError("cannot build a histogram of an empty series")
    if bins < 1:
        raise InvalidArgumentError("bins must be >= 1")
    counts, edges = np.histogram(x, bins=bins)
    return Histogram(edges, counts)


def normalize(h: Histogram) -> ProbDist:
    total = h.counts.sum()
    if total < 1:
        raise InvalidArgumentError("cannot normalize an empty histogram")
    return ProbDist(h.counts / total)


def shannon(dist: ProbDist | Any, base: float = 2.0) -> float:
    if not base > 1:
        raise InvalidArgumentError(f"entropy base must be > 1, got {base}")
    return float(entropy(_dist(dist), base=base))


def tsallis(dist: ProbDist | Any, q: float) -> float:
    """(1 - sum p^q) / (q - 1) over the non-zero outcomes."""
    if q == 1:
        raise InvalidArgumentError("Tsallis entropy is undefined at q = 1; use shannon")
    p = _dist(dist)
    p = p[p > 0]
    return float((1.0 - np.sum(p ** q)) / (q - 1.0))


def renyi(dist: ProbDist | Any, q: float, base: float = np.e) -> float:
    if q == 1:
        raise InvalidArgumentError("Renyi entropy is undefined at q = 1; use shannon")
    if not base > 1:
        raise InvalidArgumentError(f"entropy base must be > 1, got {base}")
    p = _dist(dist)
    p = p[p > 0]
    value = -np.log(np.sum(p ** q)) / ((q - 1.0) * np.log(base))
    return float(value) + 0.0


def window_features(window: Any, bins: int = DEFAULT_HIST_BINS, q: float = 2.0, base: float = 2.0) -> np.ndarray:
    """Compact (Shannon, Tsallis, Renyi) description of one window's value distribution."""
    d = normalize(histogram(window, bins))
    return np.array([shannon(d, base), tsallis(d, q), renyi(d, q, base)])
