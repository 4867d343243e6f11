from __future__ import annotations
from noc_sentinel.config import (
    DEFAULT_BUFFER_DEPTH,
    DEFAULT_DEADLOCK_WINDOW,
    DEFAULT_PACKET_LENGTH,
    DEFAULT_QUANTUM_CYCLES,
    LIVELOCK_FACTOR,
)
from noc_sentinel.errors import ConfigError, InvalidArgumentError
from dataclasses import dataclass, field
from enum import Enum, IntEnum


@dataclass(frozen=True, slots=True, order=True)
class Coordinate:
    """Router position. Origin at the south-west corner, x grows east, y grows north."""
    x: int
    y: int

    def inside(self, width: int, height: int) -> bool:
        return 0 <= self.x < width and 0 <= self.y < height

    def manhattan(self, other: Coordinate) -> int:
        return abs(self.x - other.x) + abs(self.y - other.y)

    @classmethod
    def parse(cls, text: str) -> Coordinate:
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise InvalidArgumentError(f"coordinate must be 'x,y', got {text!r}")
        try:
            return cls(int(parts[0]), int(parts[1]))
        except ValueError as e:
            raise InvalidArgumentError(f"coordinate must be integers, got {text!r}") from e

    def __str__(self) -> str:
        return f"{self.x},{self.y}"


class PortId(IntEnum):
    """Router ports in canonical tie-break order."""
    LOCAL = 0
    EAST = 1
    WEST = 2
    NORTH = 3
    SOUTH = 4

    @property
    def short(self) -> str:
        return self.name[0]

    @property
    def opposite(self) -> PortId:
        return _OPPOSITE[self]

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTA[self]

    @classmethod
    def from_short(cls, letter: str) -> PortId:
        try:
            return _BY_SHORT[letter.strip().upper()[:1]]
        except KeyError as e:
            raise InvalidArgumentError(f"unknown port {letter!r}") from e


_OPPOSITE = {
    PortId.LOCAL: PortId.LOCAL,
    PortId.EAST: PortId.WEST,
    PortId.WEST: PortId.EAST,
    PortId.NORTH: PortId.SOUTH,
    PortId.SOUTH: PortId.NORTH,
}
_DELTA = {
    PortId.LOCAL: (0, 0),
    PortId.EAST: (1, 0),
    PortId.WEST: (-1, 0),
    PortId.NORTH: (0, 1),
    PortId.SOUTH: (0, -1),
}
_BY_SHORT = {p.short: p for p in PortId}

PORTS = tuple(PortId)


class Direction(IntEnum):
    IN = 0
    OUT = 1


class FlitKind(Enum):
    HEADER = "header"
    BODY = "body"
    TAIL = "tail"


class Label(Enum):
    BENIGN = "benign"
    ATTACK = "attack"


@dataclass(slots=True)
class Flit:
    """One 32-bit flow-control unit. Only headers carry src, dest and length."""
    kind: FlitKind
    packet_id: int
    payload: int
    inject_cycle: int
    src: Coordinate | None = None
    dest: Coordinate | None = None
    length: int | None = None
    # Where the header is actually steered. Equals dest unless a tampered router rewrote it.
    route_dest: Coordinate | None = None

    def __post_init__(self):
        if not 0 <= self.payload < 2**32:
            raise InvalidArgumentError("payload must fit in a 32-bit word")
        if self.kind is FlitKind.HEADER:
            if self.src is None or self.dest is None or self.length is None:
                raise InvalidArgumentError("header flit needs src, dest and length")
            if self.length < 1:
                raise InvalidArgumentError("packet length must be >= 1")
            if self.route_dest is None:
                self.route_dest = self.dest

    @property
    def is_header(self) -> bool:
        return self.kind is FlitKind.HEADER


@dataclass(frozen=True, slots=True)
class MeshConfig:
    width: int
    height: int
    buffer_depth: int = DEFAULT_BUFFER_DEPTH
    quantum_cycles: int = DEFAULT_QUANTUM_CYCLES
    total_quanta: int = 1
    seed: int = 0
    packet_length: int = DEFAULT_PACKET_LENGTH
    deadlock_window: int = DEFAULT_DEADLOCK_WINDOW
    livelock_window: int | None = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError("mesh width and height must be positive")
        if self.width * self.height < 2:
            raise ConfigError("mesh needs at least two routers")
        if self.buffer_depth < 2:
            raise ConfigError("buffer_depth must be >= 2")
        if self.quantum_cycles < 1:
            raise ConfigError("quantum_cycles must be >= 1")
        if self.total_quanta < 1:
            raise ConfigError("total_quanta must be >= 1")
        if self.packet_length < 1:
            raise ConfigError("packet_length must be >= 1")
        if self.deadlock_window < 1:
            raise ConfigError("deadlock_window must be >= 1")
        if self.livelock_window is not None and self.livelock_window < 1:
            raise ConfigError("livelock_window must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def total_cycles(self) -> int:
        return self.total_quanta * self.quantum_cycles

    @property
    def effective_livelock_window(self) -> int:
        if self.livelock_window is not None:
            return self.livelock_window
        return LIVELOCK_FACTOR * (self.width + self.height) * self.quantum_cycles

    def contains(self, c: Coordinate) -> bool:
        return c.inside(self.width, self.height)

    def coordinates(self) -> list[Coordinate]:
        """All routers in row-major (y, then x) order."""
        return [Coordinate(x, y) for y in range(self.height) for x in range(self.width)]


class Outcome(Enum):
    COMPLETED = "Completed"
    DEADLOCK = "Deadlock"
    LIVELOCK = "Livelock"


class StallKind(Enum):
    PROGRESS = "Progress"
    DEADLOCK = "Deadlock"
    LIVELOCK = "Livelock"


@dataclass(slots=True)
class PacketRecord:
    packet_id: int
    src: Coordinate
    dest: Coordinate
    length: int
    label: Label
    scheduled_cycle: int
    entered_cycle: int | None = None
    hops: int = 0
    delivered_cycle: int | None = None
    dropped_at: Coordinate | None = None

    @property
    def delivered(self) -> bool:
        return self.delivered_cycle is not None

    @property
    def dropped(self) -> bool:
        return self.dropped_at is not None

    @property
    def latency(self) -> int | None:
        if self.delivered_cycle is None:
            return None
        return self.delivered_cycle - self.scheduled_cycle


@dataclass(frozen=True, slots=True)
class QuantumBalance:
    """Flit ledger for one quantum; in_network is sampled at the quantum's closing boundary."""
    quantum: int
    injected: int
    delivered: int
    dropped: int
    in_network: int


@dataclass(frozen=True)
class SimStatus:
    outcome: Outcome
    cycles_run: int
    packets_injected: int
    packets_delivered: int
    packets_dropped: int
    packets_in_flight: int = 0
    flits_injected: int = 0
    flits_delivered: int = 0
    flits_dropped: int = 0
    flits_in_network: int = 0
    max_head_wait: int = 0
    ledger: tuple[QuantumBalance, ...] = field(default=(), repr=False, compare=False)

    def summary(self) -> str:
        return (
            f"outcome={self.outcome.value} cycles={self.cycles_run} "
            f"injected={self.packets_injected} delivered={self.packets_delivered} "
            f"dropped={self.packets_dropped} in_flight={self.packets_in_flight}"
        )


class EventKind(Enum):
    INJECTED = "injected"
    MOVED = "moved"
    EJECTED = "ejected"
    DROPPED = "dropped"


@dataclass(frozen=True, slots=True)
class FlitEvent:
    """
    One flit transfer during a cycle.

    INJECTED enters the Local input buffer of `router`; MOVED leaves `router`
    through `out_port` into `target`'s `in_port`; EJECTED reaches the PE at
    `router`; DROPPED leaves the mesh through an edge port of `router`.
    `packet_done` marks the flit that completes delivery or loss of its packet.
    """
    kind: EventKind
    cycle: int
    router: Coordinate
    flit: Flit
    out_port: PortId | None = None
    target: Coordinate | None = None
    in_port: PortId | None = None
    packet_done: bool = False
