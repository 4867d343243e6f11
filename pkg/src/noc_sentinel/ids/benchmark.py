from __future__ import annotations
from noc_sentinel.analysis.clustering import Algorithm, Linkage, cluster, score
from noc_sentinel.analysis.distance import DTW, EUCLIDEAN, KL, MANHATTAN, Metric
from noc_sentinel.errors import InvalidArgumentError, UnsupportedMetricError
from dataclasses import dataclass
from typing import Callable, Sequence
from loguru import logger
import numpy as np
import pandas as pd


def _constant(t: np.ndarray) -> np.ndarray:
    return np.full_like(t, 0.5)


def _ramp(t: np.ndarray) -> np.ndarray:
    return t.copy()


def _spike(t: np.ndarray) -> np.ndarray:
    out = np.full_like(t, 0.1)
    out[len(t) // 2] = 1.0
    return out


def _square(t: np.ndarray) -> np.ndarray:
    return np.where((t >= 1 / 3) & (t < 2 / 3), 0.7, 0.1)


def _triangle(t: np.ndarray) -> np.ndarray:
    # two periods between 0.1 and 1
    phase = (2 * t) % 1.0
    return 0.1 + 0.9 * (1 - np.abs(2 * phase - 1))


def _half_sine(t: np.ndarray) -> np.ndarray:
    return 0.1 + 0.9 * np.sin(np.pi * t)


# t runs over [0, 1] with `width` samples; every family peaks at 1 or below
FAMILIES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "constant": _constant,
    "ramp": _ramp,
    "spike": _spike,
    "square": _square,
    "triangle": _triangle,
    "half_sine": _half_sine,
}


@dataclass(frozen=True)
class ShapeBenchmark:
    data: np.ndarray
    labels: np.ndarray
    families: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.data)


def gen_shape_benchmark(
    families: int | Sequence[str] = 6,
    count: int = 20,
    noise: float = 0.0,
    width: int = 32,
    seed: int = 0,
    amplitude: float = 1.0,
) -> ShapeBenchmark:
    """
    Labelled windows drawn from canonical shape families.

    Each item is amplitude * shape(t) plus N(0, noise * amplitude) noise,
    clipped at 0 so distribution-based metrics stay defined.
    """
    names = list(FAMILIES)[:families] if isinstance(families, int) else list(families)
    if len(names) < 2:
        raise InvalidArgumentError("the benchmark needs at least two families")
    unknown = [n for n in names if n not in FAMILIES]
    if unknown:
        raise InvalidArgumentError(f"unknown shape families {unknown}")
    if count < 1 or width < 3:
        raise InvalidArgumentError("count must be >= 1 and width >= 3")
    if noise < 0 or amplitude <= 0:
        raise InvalidArgumentError("noise must be >= 0 and amplitude > 0")

    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, width)
    rows, labels = [], []
    for label, name in enumerate(names):
        base = amplitude * FAMILIES[name](t)
        for _ in range(count):
            item = base + (rng.normal(0.0, noise * amplitude, width) if noise > 0 else 0.0)
            rows.append(np.clip(item, 0.0, None))
            labels.append(label)
    return ShapeBenchmark(np.vstack(rows), np.array(labels), tuple(names))


BENCH_METRICS: tuple[Metric, ...] = (MANHATTAN, EUCLIDEAN, KL, DTW)
BENCH_COLUMNS = ["algorithm", "metric", "rand", "jaccard", "folkes_mallows", "status"]


def run_benchmark(
    bench: ShapeBenchmark,
    k: int | None = None,
    algorithms: Sequence[Algorithm] = tuple(Algorithm),
    metrics: Sequence[Metric] = BENCH_METRICS,
    seed: int = 0,
    linkage: Linkage = Linkage.AVERAGE,
    workers: int = 1,
) -> pd.DataFrame:
    """Score every algorithm x metric cell against the generating labels."""
    k = len(bench.families) if k is None else k
    rows = []
    cells = [(a, m) for a in algorithms for m in metrics]
    for i, (algorithm, metric) in enumerate(cells, start=1):
        logger.info(f"[{i}/{len(cells)}] {algorithm.value} + {metric}")
        try:
            result = cluster(bench.data, algorithm, k, metric, seed, linkage=linkage, workers=workers)
        except UnsupportedMetricError:
            rows.append((algorithm.value, str(metric), np.nan, np.nan, np.nan, "unsupported"))
            continue
        idx = score(bench.labels, result.assignment)
        rows.append((algorithm.value, str(metric), idx.rand, idx.jaccard, idx.folkes_mallows, "ok"))
    return pd.DataFrame(rows, columns=BENCH_COLUMNS)
