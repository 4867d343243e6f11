from __future__ import annotations
from noc_sentinel.analysis.clustering import Algorithm, Linkage, cluster
from noc_sentinel.analysis.distance import EUCLIDEAN, Metric, pairwise
from noc_sentinel.config import DEFAULT_FLOOR, DEFAULT_K, DEFAULT_PERCENTILE
from noc_sentinel.errors import InvalidArgumentError, TraceParseError, TrainingPurityError
from noc_sentinel.ids.windows import Normalization, WindowSpec, prepare, slide_windows
from noc_sentinel.monitor.trace import AGGREGATE_IN, Selector, TrafficTrace, extract_series
from noc_sentinel.monitor.trace_io import format_metadata, meta_int, split_metadata
from noc_sentinel.noc.types import Coordinate
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence
from loguru import logger
import numpy as np


@dataclass(frozen=True)
class ShapeDictionary:
    """
    Shapes learned from attack-free traffic, plus per-router alarm thresholds.

    One set of centers is shared by every router; `thresholds` maps each
    router to its calibrated h.
    """
    spec: WindowSpec
    metric: Metric
    algorithm: Algorithm
    centers: np.ndarray
    thresholds: dict[Coordinate, float]
    mesh_width: int
    mesh_height: int
    selector: Selector = AGGREGATE_IN
    linkage: Linkage = Linkage.AVERAGE
    percentile: float = DEFAULT_PERCENTILE
    floor: float = DEFAULT_FLOOR
    seed: int = 0
    fingerprint: str = "none"
    # windows per training cluster, for the training log
    sizes: tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64)
        if centers.ndim != 2 or len(centers) < 1 or centers.shape[1] != self.spec.width:
            raise InvalidArgumentError(f"centers must be k x {self.spec.width}, got {centers.shape}")
        if not np.isfinite(centers).all():
            raise InvalidArgumentError("centers must be finite")
        if any(not np.isfinite(h) or h < 0 for h in self.thresholds.values()):
            raise InvalidArgumentError("thresholds must be finite and >= 0")
        object.__setattr__(self, "centers", centers)

    @property
    def k(self) -> int:
        return len(self.centers)

    def threshold(self, router: Coordinate) -> float:
        try:
            return self.thresholds[router]
        except KeyError as e:
            raise InvalidArgumentError(f"no threshold for router {router}") from e

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ShapeDictionary):
            return NotImplemented
        return (
            np.array_equal(self.centers, other.centers)
            and self.thresholds == other.thresholds
            and all(getattr(self, f) == getattr(other, f) for f in _SCALARS)
        )

    __hash__ = None  # type: ignore[assignment]


_SCALARS = (
    "spec", "metric", "algorithm", "mesh_width", "mesh_height", "selector",
    "linkage", "percentile", "floor", "seed", "fingerprint",
)


def encode_all(windows: np.ndarray, dictionary: ShapeDictionary, workers: int = 1) -> np.ndarray:
    """Nearest center per row, lowest index on ties."""
    D = pairwise(windows, dictionary.centers, dictionary.metric, workers)
    return np.argmin(D, axis=1)


def encode(x: Any, dictionary: ShapeDictionary) -> tuple[np.ndarray, int]:
    """Reconstruct `x` with the center of the cluster it falls in."""
    x = prepare(x, dictionary.spec)
    c = int(encode_all(x.reshape(1, -1), dictionary)[0])
    return dictionary.centers[c].copy(), c


def reconstruction_error(x: Any, x_prime: Any, metric: Metric = EUCLIDEAN) -> tuple[float, np.ndarray]:
    """delta = metric(x, x') and the pointwise residual x - x'."""
    x = np.asarray(getattr(x, "samples", x), dtype=np.float64).reshape(-1)
    x_prime = np.asarray(x_prime, dtype=np.float64).reshape(-1)
    if len(x) != len(x_prime):
        raise InvalidArgumentError(f"window and reconstruction differ in length: {len(x)} vs {len(x_prime)}")
    return metric(x, x_prime), x - x_prime


def calibrate_threshold(
    errors: Mapping[Coordinate, Sequence[float]],
    percentile: float = DEFAULT_PERCENTILE,
    floor: float = DEFAULT_FLOOR,
) -> dict[Coordinate, float]:
    """Per-router h = max(nearest-rank percentile of training errors, floor)."""
    if not 0 < percentile <= 100:
        raise InvalidArgumentError(f"percentile must be in (0, 100], got {percentile}")
    if floor < 0:
        raise InvalidArgumentError("threshold floor must be >= 0")
    thresholds = {}
    for router, errs in errors.items():
        errs = np.asarray(errs, dtype=np.float64)
        if len(errs) == 0:
            raise InvalidArgumentError(f"no training errors for router {router}")
        h = float(np.percentile(errs, percentile, method="inverted_cdf"))
        thresholds[router] = max(h, floor)
    return thresholds


def router_windows(trace: TrafficTrace, spec: WindowSpec, selector: Selector = AGGREGATE_IN) -> list[tuple[Coordinate, np.ndarray]]:
    return [(r, slide_windows(extract_series(trace, r, selector), spec)) for r in trace.routers()]


def train_dictionary(
    traces: Sequence[TrafficTrace],
    spec: WindowSpec = WindowSpec(),
    k: int = DEFAULT_K,
    algorithm: Algorithm = Algorithm.KMEANS,
    metric: Metric = EUCLIDEAN,
    seed: int = 0,
    percentile: float = DEFAULT_PERCENTILE,
    floor: float = DEFAULT_FLOOR,
    selector: Selector = AGGREGATE_IN,
    linkage: Linkage = Linkage.AVERAGE,
    fingerprint: str = "none",
    workers: int = 1,
) -> ShapeDictionary:
    """
    Learn a shape dictionary from attack-free traces.

    Windows from every router of every trace are pooled; identical windows
    are clustered once, weighted by how often they occur. Thresholds are
    calibrated on the reconstruction errors the encoder actually produces,
    so detecting on the training data at percentile 100 never alarms.
    """
    if not traces:
        raise InvalidArgumentError("training needs at least one trace")
    width, height = traces[0].meta.width, traces[0].meta.height
    for i, t in enumerate(traces):
        if (t.meta.width, t.meta.height) != (width, height):
            raise InvalidArgumentError(f"trace {i} is {t.meta.width}x{t.meta.height}, expected {width}x{height}")
        if t.attacked:
            raise TrainingPurityError(f"trace {i} carries attack labels; training needs attack-free traffic")

    per_router: list[tuple[Coordinate, np.ndarray]] = []
    for t in traces:
        per_router.extend(router_windows(t, spec, selector))
    X = np.vstack([w for _, w in per_router])
    if len(X) < k:
        raise InvalidArgumentError(f"only {len(X)} training windows for k={k}")

    unique, inverse, counts = np.unique(X, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    k_eff = min(k, len(unique))
    if k_eff < k:
        logger.warning(f"only {len(unique)} distinct training windows; using k={k_eff} instead of {k}")
    logger.info(
        f"Training {algorithm.value} k={k_eff} metric={metric} on {len(X)} windows "
        f"({len(unique)} distinct) from {len(traces)} traces"
    )

    result = cluster(unique, algorithm, k_eff, metric, seed, counts, linkage, workers=workers)
    sizes = tuple(int(counts[result.assignment == c].sum()) for c in range(result.k))

    draft = ShapeDictionary(
        spec, metric, algorithm, result.centers, {}, width, height, selector,
        linkage, percentile, floor, seed, fingerprint, sizes,
    )
    nearest = encode_all(unique, draft, workers)
    unique_err = np.array([
        reconstruction_error(unique[i], draft.centers[c], metric)[0] for i, c in enumerate(nearest)
    ])
    errors: dict[Coordinate, list[float]] = {}
    offset = 0
    for router, windows in per_router:
        errors.setdefault(router, []).extend(unique_err[inverse[offset:offset + len(windows)]].tolist())
        offset += len(windows)
    thresholds = calibrate_threshold(errors, percentile, floor)

    logger.info(
        f"Thresholds: min={min(thresholds.values()):.6g} max={max(thresholds.values()):.6g} "
        f"(percentile {percentile}, floor {floor})"
    )
    return ShapeDictionary(
        spec, metric, algorithm, result.centers, thresholds, width, height, selector,
        linkage, percentile, floor, seed, fingerprint, sizes,
    )


# ------------------ dictionary files ------------------

DICTIONARY_KEYS = (
    "w", "s", "normalization", "metric", "algorithm", "linkage", "k", "mesh_width",
    "mesh_height", "selector", "percentile", "floor", "seed", "fingerprint",
)


def _meta_pairs(d: ShapeDictionary) -> list[tuple[str, object]]:
    return [
        ("w", d.spec.width),
        ("s", d.spec.stride),
        ("normalization", d.spec.normalization.value),
        ("metric", d.metric),
        ("algorithm", d.algorithm.value),
        ("linkage", d.linkage.value),
        ("k", d.k),
        ("mesh_width", d.mesh_width),
        ("mesh_height", d.mesh_height),
        ("selector", d.selector),
        ("percentile", repr(float(d.percentile))),
        ("floor", repr(float(d.floor))),
        ("seed", d.seed),
        ("fingerprint", d.fingerprint),
    ]


def write_dictionary(d: ShapeDictionary, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(repr(float(v)) for v in c) for c in d.centers]
    coords = sorted(d.thresholds, key=lambda c: (c.y, c.x))
    lines += [f"{c.x},{c.y},{d.thresholds[c]!r}" for c in coords]
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(format_metadata(_meta_pairs(d)))
        f.write("\n".join(lines) + "\n")
    logger.debug(f"Wrote dictionary {path} (k={d.k}, {len(coords)} thresholds)")


def _floats(text: str, line: int, expected: int) -> list[float]:
    parts = text.split(",")
    if len(parts) != expected:
        raise TraceParseError(f"expected {expected} values, found {len(parts)}", line)
    try:
        values = [float(p) for p in parts]
    except ValueError as e:
        raise TraceParseError(f"non-numeric value in {text!r}", line) from e
    if not all(np.isfinite(values)):
        raise TraceParseError("non-finite value", line)
    return values


def read_dictionary(path: Path) -> ShapeDictionary:
    path = Path(path)
    block = split_metadata(path.read_text(encoding="utf-8"))
    known = set(DICTIONARY_KEYS)
    for key, line in block.lines.items():
        if key not in known:
            raise TraceParseError(f"unknown metadata key {key!r}", line)
    for key in known:
        if key not in block.values:
            raise TraceParseError(f"missing metadata key {key!r}", block.body_start)

    def parsed(key: str, fn):
        try:
            return fn(block.values[key])
        except (ValueError, InvalidArgumentError) as e:
            raise TraceParseError(f"bad {key}: {e}", block.lines[key]) from e

    w = meta_int(block, "w", 2)
    s = meta_int(block, "s", 1)
    k = meta_int(block, "k", 1)
    spec = parsed("normalization", lambda v: WindowSpec(w, s, Normalization(v)))
    metric = parsed("metric", Metric.parse)
    algorithm = parsed("algorithm", Algorithm.parse)
    linkage = parsed("linkage", Linkage)
    selector = parsed("selector", Selector.parse)
    percentile = parsed("percentile", float)
    floor = parsed("floor", float)

    rows = block.body.split("\n")
    if rows and rows[-1] == "":
        rows.pop()
    if len(rows) < k:
        raise TraceParseError(f"expected {k} center lines, found {len(rows)}", block.body_start + len(rows))
    centers = [_floats(rows[i], block.body_start + i, w) for i in range(k)]
    thresholds: dict[Coordinate, float] = {}
    for i in range(k, len(rows)):
        line = block.body_start + i
        x, y, h = _floats(rows[i], line, 3)
        if x != int(x) or y != int(y):
            raise TraceParseError("router coordinates must be integers", line)
        c = Coordinate(int(x), int(y))
        if c in thresholds:
            raise TraceParseError(f"duplicate threshold for router {c}", line)
        thresholds[c] = h
    return ShapeDictionary(
        spec, metric, algorithm, np.array(centers), thresholds,
        meta_int(block, "mesh_width", 1), meta_int(block, "mesh_height", 1), selector,
        linkage, percentile, floor, meta_int(block, "seed", 0), block.values["fingerprint"],
    )

