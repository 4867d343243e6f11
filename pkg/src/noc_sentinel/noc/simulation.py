from __future__ import annotations
from noc_sentinel.errors import InvalidArgumentError
from noc_sentinel.monitor.trace import TraceMeta, TrafficCounter, TrafficTrace
from noc_sentinel.noc.routing import RoutingHook, arbitrate_ttl, step_toward
from noc_sentinel.noc.types import (
    PORTS,
    Coordinate,
    EventKind,
    Flit,
    FlitEvent,
    FlitKind,
    Label,
    MeshConfig,
    Outcome,
    PacketRecord,
    PortId,
    QuantumBalance,
    SimStatus,
    StallKind,
)
from noc_sentinel.workload.attacks import (
    AttackKind,
    AttackSpec,
    apply_flooding,
    attack_labels,
    compromise_router,
    describe_attacks,
)
from noc_sentinel.workload.schedule import InjectionSchedule
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence
from loguru import logger
import numpy as np

LOCAL = PortId.LOCAL


@dataclass(slots=True)
class Reservation:
    """Wormhole lock of an output port by one input until the packet's last flit passes."""
    input_port: PortId
    remaining: int


@dataclass(slots=True)
class RouterState:
    position: Coordinate
    input_buffers: list[deque[Flit]] = field(default_factory=lambda: [deque() for _ in PORTS])
    reservations: list[Reservation | None] = field(default_factory=lambda: [None] * len(PORTS))
    ages: list[int] = field(default_factory=lambda: [0] * len(PORTS))
    # output port currently bound to each input's packet
    bound: list[PortId | None] = field(default_factory=lambda: [None] * len(PORTS))

    @property
    def occupancy(self) -> int:
        return sum(len(b) for b in self.input_buffers)


class Simulation:
    """
    Cycle-stepped wormhole mesh.

    Each cycle first decides every transfer from the state at the start of
    the cycle, then applies them, so a flit moves at most one hop per cycle
    and a freed slot is only visible to upstream routers on the next cycle.
    """

    def __init__(
        self,
        config: MeshConfig,
        schedule: InjectionSchedule,
        hooks: Mapping[Coordinate, Sequence[RoutingHook]] | None = None,
    ):
        schedule.validate(config.width, config.height)
        self.config = config
        self.width = config.width
        self.height = config.height
        self.depth = config.buffer_depth
        self.routers = [RouterState(c) for c in config.coordinates()]
        self.hooks = {c: list(hs) for c, hs in (hooks or {}).items()}
        self._links = [self._link_table(r.position) for r in self.routers]
        self._queues: list[deque[Flit]] = [deque() for _ in self.routers]
        self._entries = schedule.entries
        self._next_entry = 0
        self._rng = np.random.default_rng(config.seed)
        self._next_packet_id = 0
        self.packets: dict[int, PacketRecord] = {}
        self.cycle = 0

        self.flits_injected = 0
        self.flits_delivered = 0
        self.flits_dropped = 0
        self.packets_injected = 0
        self.packets_delivered = 0
        self.packets_dropped = 0
        self.max_head_wait = 0
        self.idle_streak = 0
        self.sinkless_streak = 0

        q = config.total_quanta
        self._q_injected = [0] * q
        self._q_delivered = [0] * q
        self._q_dropped = [0] * q
        self._q_in_network: list[int | None] = [None] * q

    def _link_table(self, c: Coordinate) -> list[tuple[int, PortId] | None]:
        table: list[tuple[int, PortId] | None] = []
        for port in PORTS:
            dx, dy = port.delta
            n = Coordinate(c.x + dx, c.y + dy)
            if port is LOCAL or not n.inside(self.width, self.height):
                table.append(None)
            else:
                table.append((n.y * self.width + n.x, port.opposite))
        return table

    @property
    def flits_in_network(self) -> int:
        return self.flits_injected - self.flits_delivered - self.flits_dropped

    @property
    def packets_in_flight(self) -> int:
        return self.packets_injected - self.packets_delivered - self.packets_dropped

    @property
    def pending(self) -> bool:
        """Flits still queued at a PE or scheduled for later."""
        return self._next_entry < len(self._entries) or any(self._queues)

    def _admit(self, cycle: int) -> None:
        entries = self._entries
        while self._next_entry < len(entries) and entries[self._next_entry].cycle <= cycle:
            e = entries[self._next_entry]
            self._next_entry += 1
            pid = self._next_packet_id
            self._next_packet_id += 1
            payloads = self._rng.integers(0, 2**32, size=e.length, dtype=np.uint64).tolist()
            self.packets[pid] = PacketRecord(pid, e.src, e.dest, e.length, e.label, e.cycle)
            queue = self._queues[e.src.y * self.width + e.src.x]
            queue.append(Flit(FlitKind.HEADER, pid, payloads[0], e.cycle, e.src, e.dest, e.length))
            for k in range(1, e.length):
                kind = FlitKind.TAIL if k == e.length - 1 else FlitKind.BODY
                queue.append(Flit(kind, pid, payloads[k], e.cycle))

    def _route(self, router: Coordinate, header: Flit, quantum: int) -> PortId:
        for hook in self.hooks.get(router, ()):
            port = hook(router, header, quantum)
            if port is not None:
                return port
        return step_toward(router, header.route_dest)

    def _has_room(self, idx: int, out: PortId) -> bool:
        link = self._links[idx][out]
        if link is None:
            return True  # ejection, or an edge port that drops
        n_idx, n_port = link
        return len(self.routers[n_idx].input_buffers[n_port]) < self.depth

    def step_cycle(self) -> list[FlitEvent]:
        cycle = self.cycle
        quantum = cycle // self.config.quantum_cycles
        self._admit(cycle)
        in_network_before = self.flits_in_network

        moves: list[tuple[int, PortId, PortId]] = []
        injections: list[int] = []
        waiting: list[tuple[int, PortId]] = []

        # decide from start-of-cycle state
        for idx, r in enumerate(self.routers):
            queue = self._queues[idx]
            if not queue and not any(r.input_buffers):
                continue
            requests: dict[PortId, list[tuple[PortId, int]]] = {}
            for p in PORTS:
                buf = r.input_buffers[p]
                if not buf:
                    continue
                waiting.append((idx, p))
                if r.bound[p] is None:
                    out = self._route(r.position, buf[0], quantum)
                    requests.setdefault(out, []).append((p, r.ages[p]))
            for out in PORTS:
                res = r.reservations[out]
                if res is None:
                    reqs = requests.get(out)
                    if not reqs:
                        continue
                    winner = arbitrate_ttl(reqs)
                    res = Reservation(winner, r.input_buffers[winner][0].length)
                    r.reservations[out] = res
                    r.bound[winner] = out
                if r.input_buffers[res.input_port] and self._has_room(idx, out):
                    moves.append((idx, res.input_port, out))
            if queue and len(r.input_buffers[LOCAL]) < self.depth:
                injections.append(idx)

        # apply
        events: list[FlitEvent] = []
        departed: set[tuple[int, PortId]] = set()
        sunk = 0
        for idx, in_port, out in moves:
            r = self.routers[idx]
            flit = r.input_buffers[in_port].popleft()
            departed.add((idx, in_port))
            res = r.reservations[out]
            res.remaining -= 1
            done = res.remaining == 0
            if done:
                r.reservations[out] = None
                r.bound[in_port] = None
            rec = self.packets[flit.packet_id]
            link = self._links[idx][out]
            if out is LOCAL:
                sunk += 1
                self.flits_delivered += 1
                self._q_delivered[quantum] += 1
                if done:
                    rec.delivered_cycle = cycle
                    self.packets_delivered += 1
                events.append(FlitEvent(EventKind.EJECTED, cycle, r.position, flit, LOCAL, packet_done=done))
            elif link is None:
                sunk += 1
                self.flits_dropped += 1
                self._q_dropped[quantum] += 1
                if done:
                    rec.dropped_at = r.position
                    self.packets_dropped += 1
                events.append(FlitEvent(EventKind.DROPPED, cycle, r.position, flit, out, packet_done=done))
            else:
                n_idx, n_port = link
                target = self.routers[n_idx]
                target.input_buffers[n_port].append(flit)
                if flit.is_header:
                    rec.hops += 1
                events.append(FlitEvent(EventKind.MOVED, cycle, r.position, flit, out, target.position, n_port))

        for idx in injections:
            flit = self._queues[idx].popleft()
            r = self.routers[idx]
            r.input_buffers[LOCAL].append(flit)
            self.flits_injected += 1
            self._q_injected[quantum] += 1
            if flit.is_header:
                self.packets[flit.packet_id].entered_cycle = cycle
                self.packets_injected += 1
            events.append(FlitEvent(EventKind.INJECTED, cycle, r.position, flit, in_port=LOCAL))

        for idx, p in waiting:
            r = self.routers[idx]
            if (idx, p) in departed:
                r.ages[p] = 0
            else:
                r.ages[p] += 1
                if r.ages[p] > self.max_head_wait:
                    self.max_head_wait = r.ages[p]

        moved = len(moves) + len(injections)
        self.idle_streak = self.idle_streak + 1 if in_network_before and not moved else 0
        # ejections and drops restart the livelock count, so does an empty network
        if sunk or not in_network_before:
            self.sinkless_streak = 0
        elif moved:
            self.sinkless_streak += 1

        self.cycle += 1
        self._close_quanta()
        return events

    def _close_quanta(self) -> None:
        """Sample in-network flits at every quantum boundary reached so far."""
        closed = min(self.cycle // self.config.quantum_cycles, self.config.total_quanta)
        for q in range(closed - 1, -1, -1):
            if self._q_in_network[q] is not None:
                break
            self._q_in_network[q] = self.flits_in_network

    def _idle(self) -> bool:
        return self.flits_in_network == 0 and not any(self._queues)

    def _skip_idle(self, end: int) -> bool:
        """Jump over cycles in which nothing can happen; returns True if it moved the clock."""
        if not self._idle():
            return False
        upcoming = self._entries[self._next_entry].cycle if self._next_entry < len(self._entries) else end
        target = min(upcoming, end)
        if target <= self.cycle:
            return False
        self.cycle = target
        self.idle_streak = 0
        self.sinkless_streak = 0
        self._close_quanta()
        return True

    def run(self, counter: TrafficCounter | None = None) -> SimStatus:
        end = self.config.total_cycles
        outcome = Outcome.COMPLETED
        while self.cycle < end:
            if self._skip_idle(end):
                continue
            events = self.step_cycle()
            if counter is not None:
                counter.observe(events)
            stall = detect_stall(self)
            if stall is not StallKind.PROGRESS:
                outcome = Outcome(stall.value)
                logger.warning(
                    f"{stall.value} at cycle {self.cycle} "
                    f"({self.flits_in_network} flits stuck, {self.packets_in_flight} packets in flight)"
                )
                break
        for q, v in enumerate(self._q_in_network):
            if v is None:
                self._q_in_network[q] = self.flits_in_network
        return self.status(outcome)

    def ledger(self) -> tuple[QuantumBalance, ...]:
        return tuple(
            QuantumBalance(q, self._q_injected[q], self._q_delivered[q], self._q_dropped[q],
                           self._q_in_network[q] if self._q_in_network[q] is not None else self.flits_in_network)
            for q in range(self.config.total_quanta)
        )

    def status(self, outcome: Outcome = Outcome.COMPLETED) -> SimStatus:
        return SimStatus(
            outcome=outcome,
            cycles_run=self.cycle,
            packets_injected=self.packets_injected,
            packets_delivered=self.packets_delivered,
            packets_dropped=self.packets_dropped,
            packets_in_flight=self.packets_in_flight,
            flits_injected=self.flits_injected,
            flits_delivered=self.flits_delivered,
            flits_dropped=self.flits_dropped,
            flits_in_network=self.flits_in_network,
            max_head_wait=self.max_head_wait,
            ledger=self.ledger(),
        )

    def buffered_flits(self) -> int:
        """Independent recount of flits sitting in input buffers."""
        return sum(r.occupancy for r in self.routers)


def detect_stall(
    sim: Simulation,
    deadlock_window: int | None = None,
    livelock_window: int | None = None,
) -> StallKind:
    dead = deadlock_window if deadlock_window is not None else sim.config.deadlock_window
    live = livelock_window if livelock_window is not None else sim.config.effective_livelock_window
    if dead < 1 or live < 1:
        raise InvalidArgumentError("stall windows must be >= 1 cycle")
    if sim.idle_streak >= dead:
        return StallKind.DEADLOCK
    if sim.sinkless_streak >= live:
        return StallKind.LIVELOCK
    return StallKind.PROGRESS


def build_hooks(config: MeshConfig, attacks: Iterable[AttackSpec]) -> dict[Coordinate, list[RoutingHook]]:
    hooks: dict[Coordinate, list[RoutingHook]] = {}
    for a in attacks:
        if a.kind is AttackKind.FLOODING:
            continue
        hook = compromise_router(config.width, config.height, a)
        hooks.setdefault(hook.router, []).append(hook)
    return hooks


def _check_attack(config: MeshConfig, a: AttackSpec) -> None:
    points = [a.attacker]
    if a.victim is not None:
        points.append(a.victim)
    if a.flow_match is not None:
        points.extend(a.flow_match)
    for c in points:
        if not config.contains(c):
            raise InvalidArgumentError(f"attack {a.describe()} references {c} outside the mesh")


def run_simulation(
    config: MeshConfig,
    schedule: InjectionSchedule,
    attacks: Sequence[AttackSpec] = (),
    monitor: bool = True,
) -> tuple[TrafficTrace | None, SimStatus]:
    """
    Run the mesh for total_quanta * quantum_cycles cycles, or until it stalls.

    Flooding attacks are merged into the schedule, tampering attacks become
    routing hooks on their routers. Returns the monitored trace (None when
    monitoring is off) and the final status.
    """
    for a in attacks:
        _check_attack(config, a)
    for a in attacks:
        if a.kind is AttackKind.FLOODING:
            schedule = apply_flooding(schedule, a, config.quantum_cycles, config.total_quanta, config.packet_length)

    sim = Simulation(config, schedule, build_hooks(config, attacks))
    counter = TrafficCounter(config.width, config.height, config.quantum_cycles, config.total_quanta) if monitor else None
    logger.info(
        f"Simulating {config.width}x{config.height} mesh for {config.total_quanta} quanta "
        f"({len(schedule)} packets scheduled, {schedule.count(Label.ATTACK)} attack)"
    )
    status = sim.run(counter)
    logger.info(status.summary())

    if counter is None:
        return None, status
    meta = TraceMeta(
        width=config.width,
        height=config.height,
        quantum_cycles=config.quantum_cycles,
        total_quanta=config.total_quanta,
        seed=config.seed,
        workload=schedule.description,
        attacks=describe_attacks(attacks),
    )
    labels = attack_labels(attacks, config.width, config.height, config.total_quanta)
    return counter.to_trace(meta, labels), status
