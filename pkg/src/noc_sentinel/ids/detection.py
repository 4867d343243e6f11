from __future__ import annotations
from noc_sentinel.config import REPORT_FIELDS, RESIDUAL_FIELDS
from noc_sentinel.errors import InvalidArgumentError, TraceParseError
from noc_sentinel.ids.dictionary import ShapeDictionary, encode_all, reconstruction_error, router_windows
from noc_sentinel.monitor.trace import TrafficTrace
from noc_sentinel.monitor.trace_io import (
    parse_counts,
    first_bad,
    format_metadata,
    meta_int,
    read_table,
    row_line,
    split_metadata,
)
from noc_sentinel.noc.types import Coordinate
from dataclasses import dataclass
from pathlib import Path
from loguru import logger
import numpy as np
import pandas as pd


@dataclass(frozen=True)
class ReconstructionRecord:
    router: Coordinate
    window_start: int
    cluster: int
    delta: float
    threshold: float
    # the window and its reconstruction; absent when read back from a report file
    x: np.ndarray | None = None
    x_prime: np.ndarray | None = None

    @property
    def anomalous(self) -> bool:
        return self.delta > self.threshold

    @property
    def residual(self) -> np.ndarray:
        if self.x is None or self.x_prime is None:
            raise InvalidArgumentError("record carries no window samples")
        return self.x - self.x_prime


@dataclass(frozen=True)
class DetectionReport:
    records: tuple[ReconstructionRecord, ...]
    window: int
    stride: int
    mesh_width: int
    mesh_height: int

    def __len__(self) -> int:
        return len(self.records)

    @property
    def anomalies(self) -> list[ReconstructionRecord]:
        return [r for r in self.records if r.anomalous]

    def summary(self) -> str:
        flagged = len(self.anomalies)
        routers = len({r.router for r in self.anomalies})
        return f"windows={len(self.records)} anomalous={flagged} routers_flagged={routers}"


def detect(trace: TrafficTrace, dictionary: ShapeDictionary, workers: int = 1) -> DetectionReport:
    """Encode every window of every router and flag those whose error exceeds the router's threshold."""
    m = trace.meta
    if (m.width, m.height) != (dictionary.mesh_width, dictionary.mesh_height):
        raise InvalidArgumentError(
            f"trace is {m.width}x{m.height} but the dictionary was trained on "
            f"{dictionary.mesh_width}x{dictionary.mesh_height}"
        )
    spec = dictionary.spec
    per_router = router_windows(trace, spec, dictionary.selector)
    X = np.vstack([w for _, w in per_router])
    nearest = encode_all(X, dictionary, workers)

    records = []
    row = 0
    for router, windows in per_router:
        h = dictionary.threshold(router)
        for start, x in zip(spec.starts(m.total_quanta), windows):
            c = int(nearest[row])
            row += 1
            x_prime = dictionary.centers[c]
            delta, _ = reconstruction_error(x, x_prime, dictionary.metric)
            records.append(ReconstructionRecord(router, start, c, delta, h, x, x_prime.copy()))
    records.sort(key=lambda r: (r.router, r.window_start))

    report = DetectionReport(tuple(records), spec.width, spec.stride, m.width, m.height)
    if report.anomalies:
        logger.warning(f"Detection flagged {len(report.anomalies)} of {len(report)} windows")
    else:
        logger.success(f"Detection flagged no anomalies in {len(report)} windows")
    return report


# ------------------ evaluation ------------------

@dataclass(frozen=True)
class EvalMetrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def precision(self) -> float:
        return 1.0 if self.tp + self.fp == 0 else self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        return 1.0 if self.tp + self.fn == 0 else self.tp / (self.tp + self.fn)

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total

    def lines(self) -> list[str]:
        return [
            f"tp={self.tp} fp={self.fp} tn={self.tn} fn={self.fn}",
            f"precision={self.precision:.3f}",
            f"recall={self.recall:.3f}",
            f"accuracy={self.accuracy:.3f}",
        ]


def window_truth(report: DetectionReport, labels: np.ndarray) -> np.ndarray:
    """A window is attacked iff any of its quanta at its router is labelled attacked."""
    labels = np.asarray(labels, dtype=bool)
    if labels.ndim != 3:
        raise InvalidArgumentError("labels must be indexed [quantum, y, x]")
    quanta, height, width = labels.shape
    truth = np.zeros(len(report.records), dtype=bool)
    for i, r in enumerate(report.records):
        end = r.window_start + report.window
        if not r.router.inside(width, height) or r.window_start < 0 or end > quanta:
            raise InvalidArgumentError(f"no labels for router {r.router} quanta {r.window_start}..{end - 1}")
        truth[i] = labels[r.window_start:end, r.router.y, r.router.x].any()
    return truth


def evaluate_detection(report: DetectionReport, labels: np.ndarray) -> EvalMetrics:
    if not report.records:
        raise InvalidArgumentError("cannot evaluate an empty report")
    truth = window_truth(report, labels)
    flagged = np.array([r.anomalous for r in report.records])
    return EvalMetrics(
        tp=int(np.sum(flagged & truth)),
        fp=int(np.sum(flagged & ~truth)),
        tn=int(np.sum(~flagged & ~truth)),
        fn=int(np.sum(~flagged & truth)),
    )


# ------------------ report files ------------------

def write_report(report: DetectionReport, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(
        [
            (r.router.x, r.router.y, r.window_start, r.cluster, repr(float(r.delta)), repr(float(r.threshold)), int(r.anomalous))
            for r in report.records
        ],
        columns=REPORT_FIELDS,
    )
    meta = [("window", report.window), ("stride", report.stride),
            ("mesh_width", report.mesh_width), ("mesh_height", report.mesh_height)]
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(format_metadata(meta))
        df.to_csv(f, index=False, lineterminator="\n")
    logger.debug(f"Wrote report {path} ({len(df)} windows)")


def _real(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return np.nan


def read_report(path: Path) -> DetectionReport:
    path = Path(path)
    block = split_metadata(path.read_text(encoding="utf-8"))
    window = meta_int(block, "window", 2)
    stride = meta_int(block, "stride", 1)
    width = meta_int(block, "mesh_width", 1)
    height = meta_int(block, "mesh_height", 1)
    df = read_table(block, REPORT_FIELDS)

    ints = {c: parse_counts(block, df[c], np.iinfo(np.int64).max, c) for c in ("x", "y", "window_start", "cluster")}
    reals = {}
    for c in ("delta", "threshold"):
        values = df[c].map(_real).to_numpy(dtype=np.float64)
        bad = first_bad(~np.isfinite(values) | (values < 0))
        if bad is not None:
            raise TraceParseError(f"bad {c} {df[c].iloc[bad]!r}", row_line(block, bad))
        reals[c] = values
    flags = parse_counts(block, df["anomalous"], 1, "anomalous flag")

    records = []
    for i in range(len(df)):
        r = ReconstructionRecord(
            Coordinate(int(ints["x"][i]), int(ints["y"][i])),
            int(ints["window_start"][i]),
            int(ints["cluster"][i]),
            float(reals["delta"][i]),
            float(reals["threshold"][i]),
        )
        if r.anomalous != bool(flags[i]):
            raise TraceParseError("anomalous flag disagrees with delta > threshold", row_line(block, i))
        records.append(r)
    return DetectionReport(tuple(records), window, stride, width, height)


def write_residuals(report: DetectionReport, directory: Path) -> list[Path]:
    """One residual CSV per flagged window: the input, its reconstruction and their difference."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for r in report.anomalies:
        df = pd.DataFrame({
            RESIDUAL_FIELDS[0]: np.arange(len(r.x)),
            RESIDUAL_FIELDS[1]: r.x,
            RESIDUAL_FIELDS[2]: r.x_prime,
            RESIDUAL_FIELDS[3]: r.residual,
        })
        path = directory / f"residual_x{r.router.x}_y{r.router.y}_w{r.window_start}.csv"
        df.to_csv(path, index=False, lineterminator="\n")
        written.append(path)
    logger.info(f"Wrote {len(written)} residual files to {directory}")
    return written
