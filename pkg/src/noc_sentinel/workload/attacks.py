from __future__ import annotations
from noc_sentinel.errors import InvalidArgumentError
from noc_sentinel.noc.routing import step_toward, step_toward_yx
from noc_sentinel.noc.types import Coordinate, Flit, Label, PortId
from noc_sentinel.workload.schedule import InjectionSchedule, ScheduleEntry
from dataclasses import dataclass
from enum import Enum
from typing import Iterable
from loguru import logger
import numpy as np


class AttackKind(Enum):
    FLOODING = "flooding"
    MISROUTING = "misrouting"
    DEADLOCK_TAMPER = "deadlock"


Flow = tuple[Coordinate, Coordinate]


@dataclass(frozen=True)
class AttackSpec:
    """
    One DoS behaviour active over quanta [start_quantum, end_quantum].

    `attacker` is the flooding source, or the tampered router for the two
    route-tampering kinds. `deflect` turns a misrouting router into a
    deflector that pushes matched headers out of a fixed port.
    """
    kind: AttackKind
    start_quantum: int
    end_quantum: int
    attacker: Coordinate
    victim: Coordinate | None = None
    rate: int = 1
    flow_match: Flow | None = None
    deflect: PortId | None = None

    def __post_init__(self):
        if self.start_quantum > self.end_quantum:
            raise InvalidArgumentError("start_quantum must be <= end_quantum")
        if self.rate < 1:
            raise InvalidArgumentError("attack rate must be >= 1")
        if self.kind is AttackKind.FLOODING and self.victim is None:
            raise InvalidArgumentError("flooding needs a victim")
        if self.deflect is PortId.LOCAL:
            raise InvalidArgumentError("deflect port cannot be Local")
        if self.deflect is not None and self.kind is not AttackKind.MISROUTING:
            raise InvalidArgumentError("deflect only applies to misrouting")

    def active(self, quantum: int) -> bool:
        return self.start_quantum <= quantum <= self.end_quantum

    @property
    def target(self) -> Coordinate:
        """Router whose quanta are ground-truth attacked."""
        if self.kind is AttackKind.FLOODING:
            assert self.victim is not None
            return self.victim
        return self.attacker

    def describe(self) -> str:
        parts = [self.kind.value, f"q{self.start_quantum}-{self.end_quantum}", f"at={self.attacker}"]
        if self.victim is not None:
            parts.append(f"victim={self.victim}")
        if self.kind is AttackKind.FLOODING:
            parts.append(f"rate={self.rate}")
        if self.flow_match is not None:
            parts.append(f"flow={self.flow_match[0]}>{self.flow_match[1]}")
        if self.deflect is not None:
            parts.append(f"deflect={self.deflect.short}")
        return ":".join(parts)


def describe_attacks(attacks: Iterable[AttackSpec]) -> str:
    return "|".join(a.describe() for a in attacks) or "none"


def apply_flooding(
    schedule: InjectionSchedule,
    spec: AttackSpec,
    quantum_cycles: int,
    total_quanta: int,
    packet_length: int,
) -> InjectionSchedule:
    """Append `rate` evenly spaced attacker->victim packets per attacked quantum."""
    if spec.kind is not AttackKind.FLOODING:
        raise InvalidArgumentError(f"apply_flooding got a {spec.kind.value} attack")
    if spec.attacker == spec.victim:
        raise InvalidArgumentError("flooding attacker and victim must differ")
    assert spec.victim is not None

    start = max(spec.start_quantum, 0)
    end = min(spec.end_quantum, total_quanta - 1)
    if end < start:
        return schedule

    extra = []
    for q in range(start, end + 1):
        base = q * quantum_cycles
        for k in range(spec.rate):
            cycle = base + (k * quantum_cycles) // spec.rate
            extra.append(ScheduleEntry(cycle, spec.attacker, spec.victim, packet_length, Label.ATTACK))
    logger.debug(f"flooding {spec.attacker}->{spec.victim}: {len(extra)} packets over quanta {start}-{end}")
    return schedule.merged(extra, f"{schedule.description}+{spec.describe()}")


class RouteTamper:
    """Routing override installed on a compromised router."""

    def __init__(self, spec: AttackSpec, width: int, height: int):
        self.spec = spec
        self.router = spec.attacker
        self.width = width
        self.height = height

    def matches(self, flit: Flit) -> bool:
        if self.spec.flow_match is None:
            return True
        return (flit.src, flit.dest) == self.spec.flow_match

    def __call__(self, router: Coordinate, flit: Flit, quantum: int) -> PortId | None:
        if router != self.router or not self.spec.active(quantum) or not self.matches(flit):
            return None
        if self.spec.kind is AttackKind.DEADLOCK_TAMPER:
            return step_toward_yx(router, flit.route_dest)
        if self.spec.deflect is not None:
            return self.spec.deflect
        # one column east of the mesh: downstream routers carry it to the edge, which drops it
        flit.route_dest = Coordinate(self.width, router.y)
        return step_toward(router, flit.route_dest)


def compromise_router(width: int, height: int, spec: AttackSpec) -> RouteTamper:
    if spec.kind not in (AttackKind.MISROUTING, AttackKind.DEADLOCK_TAMPER):
        raise InvalidArgumentError(f"cannot compromise a router with a {spec.kind.value} attack")
    if not spec.attacker.inside(width, height):
        raise InvalidArgumentError(f"tampered router {spec.attacker} is outside the mesh")
    return RouteTamper(spec, width, height)


def attack_labels(attacks: Iterable[AttackSpec], width: int, height: int, total_quanta: int) -> np.ndarray:
    """Ground truth per (quantum, y, x): attacked quanta at each victim or tampered router."""
    labels = np.zeros((total_quanta, height, width), dtype=bool)
    for a in attacks:
        start = max(a.start_quantum, 0)
        end = min(a.end_quantum, total_quanta - 1)
        if end >= start:
            labels[start:end + 1, a.target.y, a.target.x] = True
    return labels
