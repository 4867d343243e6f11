from __future__ import annotations
from noc_sentinel.config import LABEL_FIELDS, TRACE_FIELDS
from noc_sentinel.errors import TraceParseError
from noc_sentinel.monitor.trace import TraceMeta, TrafficTrace
from noc_sentinel.noc.types import PORTS, Direction
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable
from loguru import logger
import numpy as np
import pandas as pd
import io
import re

PORT_LETTERS = [p.short for p in PORTS]
DIR_NAMES = [d.name.lower() for d in Direction]


# ------------------ metadata block ------------------

@dataclass
class MetaBlock:
    """Leading `# key=value` lines of a text artifact and the body that follows them."""
    values: dict[str, str]
    lines: dict[str, int]
    body: str
    body_start: int  # 1-based line number of the first body line


def format_metadata(pairs: Iterable[tuple[str, object]]) -> str:
    return "".join(f"# {k}={v}\n" for k, v in pairs)


def split_metadata(text: str) -> MetaBlock:
    values: dict[str, str] = {}
    where: dict[str, int] = {}
    lines = text.split("\n")
    n = 0
    for n, line in enumerate(lines):
        if not line.startswith("#"):
            break
        key, sep, value = line[1:].strip().partition("=")
        if not sep or not key.strip():
            raise TraceParseError(f"malformed metadata line {line!r}", n + 1)
        key = key.strip()
        if key in values:
            raise TraceParseError(f"duplicate metadata key {key!r}", n + 1)
        values[key] = value.strip()
        where[key] = n + 1
    else:
        n = len(lines)
    return MetaBlock(values, where, "\n".join(lines[n:]), n + 1)


def meta_int(block: MetaBlock, key: str, minimum: int | None = None) -> int:
    if key not in block.values:
        raise TraceParseError(f"missing metadata key {key!r}", block.body_start)
    raw = block.values[key]
    try:
        value = int(raw)
    except ValueError as e:
        raise TraceParseError(f"{key} must be an integer, got {raw!r}", block.lines[key]) from e
    if minimum is not None and value < minimum:
        raise TraceParseError(f"{key} must be >= {minimum}, got {value}", block.lines[key])
    return value


def read_table(block: MetaBlock, fields: list[str]) -> pd.DataFrame:
    """Parse the CSV body as strings and check its header; row r sits on line body_start + 1 + r."""
    if not block.body.strip():
        raise TraceParseError("missing CSV header", block.body_start)
    try:
        df = pd.read_csv(
            io.StringIO(block.body),
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
        )
    except pd.errors.ParserError as e:
        m = re.search(r"line (\d+)", str(e))
        line = block.body_start - 1 + int(m.group(1)) if m else block.body_start
        raise TraceParseError(f"malformed row: {e}", line) from e
    if list(df.columns) != fields:
        raise TraceParseError(f"expected header {','.join(fields)}, got {','.join(map(str, df.columns))}", block.body_start)
    blank = (df.fillna("") == "").all(axis=1)
    if blank.any():
        raise TraceParseError("blank row", row_line(block, int(np.argmax(blank.to_numpy()))))
    return df


def row_line(block: MetaBlock, row: int) -> int:
    return block.body_start + 1 + row


def first_bad(mask: pd.Series | np.ndarray) -> int | None:
    arr = np.asarray(mask, dtype=bool)
    return int(np.argmax(arr)) if arr.any() else None


def _check_rows(block: MetaBlock, df: pd.DataFrame, expected: int) -> None:
    if len(df) < expected:
        raise TraceParseError(f"truncated: expected {expected} rows, found {len(df)}", row_line(block, len(df)))
    if len(df) > expected:
        raise TraceParseError(f"unexpected extra row beyond {expected} rows", row_line(block, expected))


def _check_keys(block: MetaBlock, df: pd.DataFrame, expected: pd.DataFrame) -> None:
    bad = first_bad((df[expected.columns].to_numpy() != expected.to_numpy()).any(axis=1))
    if bad is not None:
        want = ",".join(expected.iloc[bad])
        got = ",".join(df[expected.columns].iloc[bad])
        raise TraceParseError(f"rows out of order: expected keys {want}, got {got}", row_line(block, bad))


def parse_counts(block: MetaBlock, column: pd.Series, upper: int, what: str) -> np.ndarray:
    digits = column.str.fullmatch(r"\d+")
    bad = first_bad(~digits)
    if bad is not None:
        raw = column.iloc[bad]
        reason = "negative" if raw.strip().startswith("-") else "non-numeric"
        raise TraceParseError(f"{reason} {what} {raw!r}", row_line(block, bad))
    values = column.astype(np.int64).to_numpy()
    bad = first_bad(values > upper)
    if bad is not None:
        raise TraceParseError(f"{what} {values[bad]} exceeds {upper}", row_line(block, bad))
    return values


# ------------------ traces ------------------

def labels_path_for(path: Path) -> Path:
    return Path(path).with_suffix(".labels.csv")


def _trace_keys(meta: TraceMeta) -> pd.DataFrame:
    """Key columns every trace row must carry, in file order, as strings."""
    q, y, x, p, d = np.indices(meta.shape).reshape(5, -1)
    return pd.DataFrame({
        "quantum": q.astype(str),
        "x": x.astype(str),
        "y": y.astype(str),
        "port": np.array(PORT_LETTERS)[p],
        "dir": np.array(DIR_NAMES)[d],
    })


def write_trace(trace: TrafficTrace, path: Path, labels_path: Path | None = None) -> Path:
    """Write the dense trace CSV plus its label sidecar; returns the sidecar path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = _trace_keys(trace.meta)
    df["count"] = trace.counts.reshape(-1)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(format_metadata(trace.meta.as_pairs()))
        df.to_csv(f, index=False, lineterminator="\n")
    sidecar = Path(labels_path) if labels_path is not None else labels_path_for(path)
    write_labels(trace.labels, sidecar)
    logger.debug(f"Wrote trace {path} ({len(df)} rows) and labels {sidecar}")
    return sidecar


def parse_trace_meta(block: MetaBlock) -> TraceMeta:
    known = {"width", "height", "quantum_cycles", "total_quanta", "seed", "unit", "workload", "attacks"}
    for key, line in block.lines.items():
        if key not in known:
            raise TraceParseError(f"unknown metadata key {key!r}", line)
    return TraceMeta(
        width=meta_int(block, "width", 1),
        height=meta_int(block, "height", 1),
        quantum_cycles=meta_int(block, "quantum_cycles", 1),
        total_quanta=meta_int(block, "total_quanta", 1),
        seed=meta_int(block, "seed", 0),
        unit=block.values.get("unit", "flits"),
        workload=block.values.get("workload", "none"),
        attacks=block.values.get("attacks", "none"),
    )


def read_trace(path: Path, labels_path: Path | None = None) -> TrafficTrace:
    """
    Parse a trace CSV. Any defect raises TraceParseError with its 1-based line.

    The label sidecar is read from `labels_path`, or from the default
    sidecar next to the trace when it exists; without one every quantum is
    attack-free.
    """
    path = Path(path)
    block = split_metadata(path.read_text(encoding="utf-8"))
    meta = parse_trace_meta(block)
    df = read_table(block, TRACE_FIELDS)
    expected = int(np.prod(meta.shape))
    _check_rows(block, df, expected)
    _check_keys(block, df, _trace_keys(meta))
    counts = parse_counts(block, df["count"], meta.quantum_cycles, "count").reshape(meta.shape)

    sidecar = Path(labels_path) if labels_path is not None else labels_path_for(path)
    labels = None
    if labels_path is not None or sidecar.exists():
        labels = read_labels(sidecar, meta.width, meta.height, meta.total_quanta)
    return TrafficTrace(meta, counts, labels)


# ------------------ labels ------------------

def _label_keys(total_quanta: int, height: int, width: int) -> pd.DataFrame:
    q, y, x = np.indices((total_quanta, height, width)).reshape(3, -1)
    return pd.DataFrame({"quantum": q.astype(str), "x": x.astype(str), "y": y.astype(str)})


def write_labels(labels: np.ndarray, path: Path) -> None:
    labels = np.asarray(labels, dtype=bool)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = _label_keys(*labels.shape)
    df["attacked"] = labels.reshape(-1).astype(np.int64)
    df.to_csv(path, index=False, lineterminator="\n")


def read_labels(path: Path, width: int, height: int, total_quanta: int | None = None) -> np.ndarray:
    """Ground truth indexed [quantum, y, x]; the quantum count is inferred from the rows when not given."""
    path = Path(path)
    block = split_metadata(path.read_text(encoding="utf-8"))
    df = read_table(block, LABEL_FIELDS)
    if total_quanta is None:
        if len(df) == 0 or len(df) % (width * height):
            raise TraceParseError(f"label rows do not cover whole quanta of a {width}x{height} mesh", row_line(block, len(df)))
        total_quanta = len(df) // (width * height)
    _check_rows(block, df, total_quanta * height * width)
    _check_keys(block, df, _label_keys(total_quanta, height, width))
    flags = parse_counts(block, df["attacked"], 1, "attacked flag")
    return flags.astype(bool).reshape(total_quanta, height, width)
