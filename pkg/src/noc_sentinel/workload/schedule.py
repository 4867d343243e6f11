from __future__ import annotations
from noc_sentinel.errors import InvalidArgumentError
from noc_sentinel.noc.types import Coordinate, Label
from dataclasses import dataclass
from typing import Iterable, Iterator
import numpy as np


@dataclass(frozen=True, slots=True)
class ScheduleEntry:
    cycle: int
    src: Coordinate
    dest: Coordinate
    length: int
    label: Label = Label.BENIGN


@dataclass(frozen=True)
class InjectionSchedule:
    """Packets to inject, ordered by cycle. Labels are the evaluation ground truth."""
    entries: tuple[ScheduleEntry, ...] = ()
    description: str = "none"

    def __post_init__(self):
        last = -1
        for e in self.entries:
            if e.cycle < last:
                raise InvalidArgumentError("schedule cycles must be non-decreasing")
            if e.cycle < 0 or e.length < 1:
                raise InvalidArgumentError(f"bad schedule entry {e}")
            if e.src == e.dest:
                raise InvalidArgumentError(f"packet at cycle {e.cycle} sends {e.src} to itself")
            last = e.cycle

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ScheduleEntry]:
        return iter(self.entries)

    def validate(self, width: int, height: int) -> None:
        for e in self.entries:
            if not (e.src.inside(width, height) and e.dest.inside(width, height)):
                raise InvalidArgumentError(
                    f"entry at cycle {e.cycle} ({e.src} -> {e.dest}) leaves the {width}x{height} mesh"
                )

    def merged(self, extra: Iterable[ScheduleEntry], description: str) -> InjectionSchedule:
        # sorted() is stable: existing entries stay ahead of added ones at equal cycles
        combined = sorted([*self.entries, *extra], key=lambda e: e.cycle)
        return InjectionSchedule(tuple(combined), description)

    def count(self, label: Label) -> int:
        return sum(1 for e in self.entries if e.label is label)

    @property
    def last_cycle(self) -> int:
        return self.entries[-1].cycle if self.entries else -1


def injection_counts(
    schedule: InjectionSchedule,
    width: int,
    height: int,
    quantum_cycles: int,
    quanta: int,
) -> np.ndarray:
    """Packets scheduled per (quantum, y, x) at the source PE."""
    counts = np.zeros((quanta, height, width), dtype=np.int64)
    for e in schedule:
        q = e.cycle // quantum_cycles
        if q < quanta:
            counts[q, e.src.y, e.src.x] += 1
    return counts
