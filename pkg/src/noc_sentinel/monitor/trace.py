from __future__ import annotations
from noc_sentinel.errors import InvalidArgumentError
from noc_sentinel.noc.types import PORTS, Coordinate, Direction, EventKind, FlitEvent, PortId
from dataclasses import dataclass, fields
from typing import Iterable
import numpy as np
import pandas as pd

N_PORTS = len(PORTS)
N_DIRS = len(Direction)


@dataclass(frozen=True)
class TraceMeta:
    width: int
    height: int
    quantum_cycles: int
    total_quanta: int
    seed: int
    unit: str = "flits"
    workload: str = "none"
    attacks: str = "none"

    @property
    def shape(self) -> tuple[int, int, int, int, int]:
        return (self.total_quanta, self.height, self.width, N_PORTS, N_DIRS)

    def as_pairs(self) -> list[tuple[str, str]]:
        return [(f.name, str(getattr(self, f.name))) for f in fields(self)]


class TrafficTrace:
    """
    Per-quantum flit counts for every (router, port, direction).

    `counts` is indexed [quantum, y, x, port, direction]; `labels` is the
    attack ground truth indexed [quantum, y, x].
    """

    def __init__(self, meta: TraceMeta, counts: np.ndarray, labels: np.ndarray | None = None):
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != meta.shape:
            raise InvalidArgumentError(f"counts shape {counts.shape} does not match {meta.shape}")
        if (counts < 0).any():
            raise InvalidArgumentError("flit counts must be non-negative")
        if (counts > meta.quantum_cycles).any():
            raise InvalidArgumentError("a port cannot carry more than quantum_cycles flits per quantum")
        if labels is None:
            labels = np.zeros(meta.shape[:3], dtype=bool)
        labels = np.asarray(labels, dtype=bool)
        if labels.shape != meta.shape[:3]:
            raise InvalidArgumentError(f"labels shape {labels.shape} does not match {meta.shape[:3]}")
        self.meta = meta
        self.counts = counts
        self.labels = labels
        self.counts.setflags(write=False)
        self.labels.setflags(write=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrafficTrace):
            return NotImplemented
        return (
            self.meta == other.meta
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        m = self.meta
        return f"TrafficTrace({m.width}x{m.height}, quanta={m.total_quanta}, flits_in={self.counts[..., 0].sum()})"

    @property
    def attacked(self) -> bool:
        return bool(self.labels.any())

    def routers(self) -> list[Coordinate]:
        return [Coordinate(x, y) for y in range(self.meta.height) for x in range(self.meta.width)]

    def count(self, quantum: int, router: Coordinate, port: PortId, direction: Direction) -> int:
        return int(self.counts[quantum, router.y, router.x, port, direction])


@dataclass(frozen=True)
class Selector:
    """Which counts of a router become its time series."""
    kind: str
    port: PortId | None = None
    direction: Direction = Direction.IN

    def __post_init__(self):
        if self.kind not in ("aggregate", "port"):
            raise InvalidArgumentError(f"unknown selector kind {self.kind!r}")
        if self.kind == "port" and self.port is None:
            raise InvalidArgumentError("port selector needs a port")

    @classmethod
    def of_port(cls, port: PortId, direction: Direction) -> Selector:
        return cls("port", port, direction)

    @classmethod
    def parse(cls, text: str) -> Selector:
        """'in' / 'out' for aggregates, '<L|E|W|N|S>:<in|out>' for one port."""
        text = text.strip().lower()
        if text in ("in", "out"):
            return cls("aggregate", None, Direction[text.upper()])
        port, _, d = text.partition(":")
        if d not in ("in", "out"):
            raise InvalidArgumentError(f"bad selector {text!r}")
        return cls.of_port(PortId.from_short(port), Direction[d.upper()])

    def __str__(self) -> str:
        d = self.direction.name.lower()
        return d if self.kind == "aggregate" else f"{self.port.short}:{d}"


AGGREGATE_IN = Selector("aggregate", None, Direction.IN)
AGGREGATE_OUT = Selector("aggregate", None, Direction.OUT)


@dataclass(frozen=True)
class TimeSeries:
    samples: np.ndarray
    router: Coordinate | None = None
    selector: Selector | None = None
    start: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidArgumentError("a time series is one-dimensional")
        if not np.isfinite(samples).all():
            raise InvalidArgumentError("time series samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)


def extract_series(trace: TrafficTrace, router: Coordinate, selector: Selector = AGGREGATE_IN) -> TimeSeries:
    m = trace.meta
    if not router.inside(m.width, m.height):
        raise InvalidArgumentError(f"router {router} is not in the {m.width}x{m.height} mesh")
    cell = trace.counts[:, router.y, router.x]
    if selector.kind == "aggregate":
        samples = cell[:, :, selector.direction].sum(axis=1)
    else:
        samples = cell[:, selector.port, selector.direction]
    return TimeSeries(samples.astype(np.float64), router, selector, 0)


def port_totals(trace: TrafficTrace) -> pd.DataFrame:
    """Whole-run flit totals per (router, port, direction)."""
    totals = trace.counts.sum(axis=0)
    y, x, p, d = np.indices(totals.shape).reshape(4, -1)
    return pd.DataFrame({
        "x": x,
        "y": y,
        "port": [PORTS[i].short for i in p],
        "dir": [Direction(i).name.lower() for i in d],
        "count": totals.reshape(-1),
    })


class TrafficCounter:
    """Out-of-band monitor: counts flits per quantum without touching the mesh."""

    def __init__(self, width: int, height: int, quantum_cycles: int, total_quanta: int):
        self.width = width
        self.height = height
        self.quantum_cycles = quantum_cycles
        self.total_quanta = total_quanta
        self._cells = [0] * (total_quanta * height * width * N_PORTS * N_DIRS)

    def _index(self, router: Coordinate, port: PortId, direction: Direction, quantum: int) -> int:
        return (((quantum * self.height + router.y) * self.width + router.x) * N_PORTS + port) * N_DIRS + direction

    def record(self, router: Coordinate, port: PortId, direction: Direction, quantum: int) -> None:
        if 0 <= quantum < self.total_quanta:
            self._cells[self._index(router, port, direction, quantum)] += 1

    def observe(self, events: Iterable[FlitEvent]) -> None:
        for ev in events:
            q = ev.cycle // self.quantum_cycles
            if ev.kind is EventKind.INJECTED:
                self.record(ev.router, PortId.LOCAL, Direction.IN, q)
            elif ev.kind is EventKind.EJECTED:
                self.record(ev.router, PortId.LOCAL, Direction.OUT, q)
            elif ev.kind is EventKind.DROPPED:
                self.record(ev.router, ev.out_port, Direction.OUT, q)
            else:
                self.record(ev.router, ev.out_port, Direction.OUT, q)
                self.record(ev.target, ev.in_port, Direction.IN, q)

    def value(self, router: Coordinate, port: PortId, direction: Direction, quantum: int) -> int:
        return self._cells[self._index(router, port, direction, quantum)]

    def to_trace(self, meta: TraceMeta, labels: np.ndarray | None = None) -> TrafficTrace:
        counts = np.array(self._cells, dtype=np.int64).reshape(meta.shape)
        return TrafficTrace(meta, counts, labels)
