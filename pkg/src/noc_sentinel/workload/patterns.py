from __future__ import annotations
from noc_sentinel.config import DEFAULT_BURST, DEFAULT_PERIOD, DEFAULT_RAMP
from noc_sentinel.errors import InvalidArgumentError
from noc_sentinel.noc.types import Coordinate
from noc_sentinel.workload.schedule import InjectionSchedule, ScheduleEntry
from dataclasses import dataclass
from enum import Enum
from typing import Callable
from loguru import logger
import numpy as np


class PatternKind(Enum):
    UNIFORM = "uniform"
    TRANSPOSED = "transposed"
    HOTSPOT = "hotspot"
    PERIODIC_APP = "periodic"
    COMPLEMENT = "complement"


@dataclass(frozen=True)
class PatternSpec:
    """
    Synthetic traffic description.

    Args:
        kind: Which generator to run.
        rate: Packets per PE per quantum. Poisson mean for the random patterns,
            burst height for PERIODIC_APP.
        hotspot: Destination favoured by HOTSPOT.
        hot_fraction: Probability that a HOTSPOT packet targets the hotspot.
        period: PERIODIC_APP cycle length in quanta.
        ramp: Quanta of linearly rising load that open each period.
        burst: Quanta at full rate following the ramp; the rest of the period is quiet.
        phase_step: Per-PE phase offset, phase = phase_step * (y * width + x) mod period.
        jitter: Max random delay in cycles of a PERIODIC_APP burst within its quantum.
        seed: Seed of the generator's own RNG.
    """
    kind: PatternKind
    rate: float = 1.0
    hotspot: Coordinate | None = None
    hot_fraction: float = 0.0
    period: int = DEFAULT_PERIOD
    ramp: int = DEFAULT_RAMP
    burst: int = DEFAULT_BURST
    phase_step: int = 0
    jitter: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.rate < 0:
            raise InvalidArgumentError("rate must be >= 0")
        if not 0.0 <= self.hot_fraction <= 1.0:
            raise InvalidArgumentError("hot_fraction must be within [0, 1]")
        if self.period < 1:
            raise InvalidArgumentError("period must be >= 1 quantum")
        if self.ramp < 0 or self.burst < 0 or self.ramp + self.burst > self.period:
            raise InvalidArgumentError("ramp + burst must fit in the period")
        if self.phase_step < 0 or self.jitter < 0:
            raise InvalidArgumentError("phase_step and jitter must be >= 0")
        if self.kind is PatternKind.HOTSPOT and self.hotspot is None:
            raise InvalidArgumentError("hotspot pattern needs a hotspot coordinate")


def _entries_to_schedule(entries: list[ScheduleEntry], description: str) -> InjectionSchedule:
    entries.sort(key=lambda e: e.cycle)
    logger.debug(f"{description}: {len(entries)} packets")
    return InjectionSchedule(tuple(entries), description)


def _poisson_traffic(
    width: int,
    height: int,
    spec: PatternSpec,
    quanta: int,
    quantum_cycles: int,
    packet_length: int,
    pick_dest: Callable[[np.random.Generator, Coordinate], Coordinate | None],
    sources: list[Coordinate],
) -> list[ScheduleEntry]:
    rng = np.random.default_rng(spec.seed)
    counts = rng.poisson(spec.rate, size=(quanta, len(sources)))
    entries = []
    for q in range(quanta):
        base = q * quantum_cycles
        for i, src in enumerate(sources):
            for _ in range(int(counts[q, i])):
                dest = pick_dest(rng, src)
                cycle = base + int(rng.integers(quantum_cycles))
                if dest is not None:
                    entries.append(ScheduleEntry(cycle, src, dest, packet_length))
    return entries


def _uniform_other(rng: np.random.Generator, src: Coordinate, width: int, height: int) -> Coordinate:
    """Uniform pick among the other width*height - 1 nodes."""
    own = src.y * width + src.x
    k = int(rng.integers(width * height - 1))
    if k >= own:
        k += 1
    return Coordinate(k % width, k // width)


def _all_nodes(width: int, height: int) -> list[Coordinate]:
    return [Coordinate(x, y) for y in range(height) for x in range(width)]


def gen_uniform(width: int, height: int, spec: PatternSpec, quanta: int,
                quantum_cycles: int, packet_length: int) -> InjectionSchedule:
    entries = _poisson_traffic(
        width, height, spec, quanta, quantum_cycles, packet_length,
        lambda rng, src: _uniform_other(rng, src, width, height),
        _all_nodes(width, height),
    )
    return _entries_to_schedule(entries, f"uniform(rate={spec.rate},seed={spec.seed})")


def gen_transposed(width: int, height: int, spec: PatternSpec, quanta: int,
                   quantum_cycles: int, packet_length: int) -> InjectionSchedule:
    """PE(x,y) sends only to PE(y,x); diagonal PEs stay silent."""
    if width != height:
        raise InvalidArgumentError(f"transposed traffic needs a square mesh, got {width}x{height}")
    sources = [c for c in _all_nodes(width, height) if c.x != c.y]
    entries = _poisson_traffic(
        width, height, spec, quanta, quantum_cycles, packet_length,
        lambda rng, src: Coordinate(src.y, src.x),
        sources,
    )
    return _entries_to_schedule(entries, f"transposed(rate={spec.rate},seed={spec.seed})")


def gen_hotspot(width: int, height: int, spec: PatternSpec, quanta: int,
                quantum_cycles: int, packet_length: int) -> InjectionSchedule:
    hot = spec.hotspot
    if hot is None or not hot.inside(width, height):
        raise InvalidArgumentError(f"hotspot {hot} is outside the {width}x{height} mesh")

    def pick(rng: np.random.Generator, src: Coordinate) -> Coordinate | None:
        if rng.random() < spec.hot_fraction:
            # the hotspot PE has nobody to send a hot packet to
            return None if src == hot else hot
        return _uniform_other(rng, src, width, height)

    entries = _poisson_traffic(
        width, height, spec, quanta, quantum_cycles, packet_length, pick, _all_nodes(width, height)
    )
    return _entries_to_schedule(
        entries, f"hotspot(rate={spec.rate},at={hot},fraction={spec.hot_fraction},seed={spec.seed})"
    )


def gen_complement(width: int, height: int, spec: PatternSpec, quanta: int,
                   quantum_cycles: int, packet_length: int) -> InjectionSchedule:
    """PE(x,y) sends to PE(W-1-x, H-1-y); a centre PE mapping to itself stays silent."""
    sources = [c for c in _all_nodes(width, height)
               if Coordinate(width - 1 - c.x, height - 1 - c.y) != c]
    entries = _poisson_traffic(
        width, height, spec, quanta, quantum_cycles, packet_length,
        lambda rng, src: Coordinate(width - 1 - src.x, height - 1 - src.y),
        sources,
    )
    return _entries_to_schedule(entries, f"complement(rate={spec.rate},seed={spec.seed})")


def periodic_profile(spec: PatternSpec, position: int) -> int:
    """Packets a PE emits at `position` within its period: ramp, then burst, then quiet."""
    t = position % spec.period
    if t < spec.ramp:
        return int(spec.rate * (t + 1) / (spec.ramp + 1) + 0.5)
    if t < spec.ramp + spec.burst:
        return int(spec.rate + 0.5)
    return 0


def periodic_partner(src: Coordinate, width: int, height: int) -> Coordinate:
    dest = Coordinate((src.x + width // 2) % width, (src.y + height // 2) % height)
    if dest == src:
        dest = Coordinate((src.x + 1) % width, (src.y + 1) % height)
    return dest


def gen_periodic_app(width: int, height: int, spec: PatternSpec, quanta: int,
                     quantum_cycles: int, packet_length: int) -> InjectionSchedule:
    """
    Application-like periodic load.

    Every PE repeats the same ramp/burst/quiet profile toward a fixed partner,
    shifted by its phase, so per-router quantum counts form periodic series.
    Bursts are injected back to back from the start of the quantum (plus jitter).
    """
    rng = np.random.default_rng(spec.seed)
    entries = []
    for idx, src in enumerate(_all_nodes(width, height)):
        phase = (spec.phase_step * idx) % spec.period
        dest = periodic_partner(src, width, height)
        for q in range(quanta):
            n = periodic_profile(spec, q + phase)
            if n == 0:
                continue
            offset = int(rng.integers(spec.jitter + 1)) if spec.jitter else 0
            base = q * quantum_cycles
            for k in range(n):
                cycle = base + min(offset + k * packet_length, quantum_cycles - 1)
                entries.append(ScheduleEntry(cycle, src, dest, packet_length))
    return _entries_to_schedule(
        entries,
        f"periodic(rate={spec.rate},period={spec.period},ramp={spec.ramp},"
        f"burst={spec.burst},phase_step={spec.phase_step},seed={spec.seed})",
    )


_GENERATORS = {
    PatternKind.UNIFORM: gen_uniform,
    PatternKind.TRANSPOSED: gen_transposed,
    PatternKind.HOTSPOT: gen_hotspot,
    PatternKind.PERIODIC_APP: gen_periodic_app,
    PatternKind.COMPLEMENT: gen_complement,
}


def generate(width: int, height: int, spec: PatternSpec, quanta: int,
             quantum_cycles: int, packet_length: int) -> InjectionSchedule:
    return _GENERATORS[spec.kind](width, height, spec, quanta, quantum_cycles, packet_length)
