from noc_sentinel.monitor.trace import extract_series
from noc_sentinel.noc.simulation import Simulation, build_hooks, detect_stall, run_simulation
from noc_sentinel.noc.types import Coordinate, Direction, Label, MeshConfig, Outcome, PortId, StallKind
from noc_sentinel.errors import InvalidArgumentError
from noc_sentinel.workload.attacks import AttackKind, AttackSpec, apply_flooding
from noc_sentinel.workload.patterns import PatternKind, PatternSpec, generate
from noc_sentinel.workload.schedule import InjectionSchedule
import pytest

C = Coordinate


def test_zero_contention_latency(mk_mesh, mk_schedule):
    # header: inject(0), hop(1), eject(2); tail ejects two cycles later
    sim = Simulation(mk_mesh(2, 1), mk_schedule((0, (0, 0), (1, 0), 3)))
    status = sim.run()
    rec = sim.packets[0]
    assert rec.delivered_cycle == 4
    assert rec.latency == 4
    assert rec.hops == 1
    assert status.outcome is Outcome.COMPLETED
    assert status.packets_delivered == 1 and status.flits_delivered == 3


def test_latency_grows_with_distance(mk_mesh, mk_schedule):
    sim = Simulation(mk_mesh(4, 4), mk_schedule((0, (0, 0), (3, 3), 1)))
    sim.run()
    # inject + 6 hops + eject
    assert sim.packets[0].delivered_cycle == 7


def test_local_wins_tie_and_loser_ages(mk_mesh, mk_schedule):
    sim = Simulation(mk_mesh(3, 1), mk_schedule((0, (0, 0), (2, 0), 4), (1, (1, 0), (2, 0), 4)))
    for _ in range(3):
        sim.step_cycle()
    middle = sim.routers[1]
    assert middle.reservations[PortId.EAST].input_port is PortId.LOCAL
    assert middle.ages[PortId.WEST] == 1
    assert middle.ages[PortId.LOCAL] == 0
    sim.run()
    assert sim.packets[0].delivered and sim.packets[1].delivered
    assert sim.packets[1].delivered_cycle < sim.packets[0].delivered_cycle


def test_wormhole_packets_do_not_interleave(mk_mesh, mk_schedule):
    sim = Simulation(mk_mesh(3, 1), mk_schedule((0, (0, 0), (2, 0), 4), (0, (1, 0), (2, 0), 4)))
    ejected = []
    while sim.pending or sim.flits_in_network:
        for ev in sim.step_cycle():
            if ev.out_port is PortId.LOCAL:
                ejected.append(ev.flit.packet_id)
    assert ejected in ([0] * 4 + [1] * 4, [1] * 4 + [0] * 4)


def test_flit_conservation_every_cycle(mk_mesh, mk_schedule):
    packets = [(c, (c % 3, 0), (2, 2), 5) for c in range(0, 30, 3)] + [(5, (2, 2), (0, 0), 6)]
    sim = Simulation(mk_mesh(3, 3, buffer_depth=2), mk_schedule(*packets))
    while sim.pending or sim.flits_in_network:
        sim.step_cycle()
        assert sim.flits_injected == sim.flits_delivered + sim.flits_dropped + sim.buffered_flits()
        for r in sim.routers:
            assert all(len(b) <= 2 for b in r.input_buffers)
    assert sim.flits_delivered == sum(p[3] for p in packets)


def test_ledger_balances(mk_mesh, mk_schedule):
    sim = Simulation(mk_mesh(3, 3, quantum_cycles=10, total_quanta=5),
                     mk_schedule((0, (0, 0), (2, 2), 8), (3, (2, 0), (0, 2), 8), (25, (1, 1), (0, 0), 4)))
    status = sim.run()
    ledger = status.ledger
    assert len(ledger) == 5
    in_network = 0
    for q in ledger:
        in_network += q.injected - q.delivered - q.dropped
        assert q.in_network == in_network
    assert sum(q.injected for q in ledger) == status.flits_injected == 20


def test_empty_schedule_completes(mk_mesh):
    status = Simulation(mk_mesh(2, 2), InjectionSchedule()).run()
    assert status.outcome is Outcome.COMPLETED
    assert status.cycles_run == 1000
    assert status.flits_injected == 0


def test_deadlock_ring_is_detected(mk_schedule):
    config = MeshConfig(2, 2, buffer_depth=4, quantum_cycles=100, total_quanta=20, deadlock_window=200, packet_length=8)
    schedule = mk_schedule(
        (0, (0, 0), (1, 1), 8), (0, (1, 0), (0, 1), 8), (0, (1, 1), (0, 0), 8), (0, (0, 1), (1, 0), 8),
    )
    attacks = [
        AttackSpec(AttackKind.DEADLOCK_TAMPER, 0, 19, C(0, 0), flow_match=(C(0, 0), C(1, 1))),
        AttackSpec(AttackKind.DEADLOCK_TAMPER, 0, 19, C(1, 1), flow_match=(C(1, 1), C(0, 0))),
    ]
    trace, status = run_simulation(config, schedule, attacks)
    assert status.outcome is Outcome.DEADLOCK
    assert status.packets_delivered == 0
    assert status.flits_in_network == 32
    assert status.cycles_run < config.total_cycles
    assert trace.labels[:, 0, 0].all() and trace.labels[:, 1, 1].all()


def test_plain_xy_ring_completes(mk_schedule):
    config = MeshConfig(2, 2, quantum_cycles=100, total_quanta=2)
    schedule = mk_schedule(
        (0, (0, 0), (1, 1), 8), (0, (1, 0), (0, 1), 8), (0, (1, 1), (0, 0), 8), (0, (0, 1), (1, 0), 8),
    )
    _, status = run_simulation(config, schedule)
    assert status.outcome is Outcome.COMPLETED
    assert status.packets_delivered == 4


def test_livelock_by_deflection(mk_schedule):
    config = MeshConfig(3, 1, quantum_cycles=100, total_quanta=10, livelock_window=50)
    flow = (C(0, 0), C(2, 0))
    attacks = [
        AttackSpec(AttackKind.MISROUTING, 0, 9, C(1, 0), flow_match=flow, deflect=PortId.WEST),
        AttackSpec(AttackKind.MISROUTING, 0, 9, C(0, 0), flow_match=flow, deflect=PortId.EAST),
    ]
    trace, status = run_simulation(config, mk_schedule((0, (0, 0), (2, 0), 1)), attacks)
    assert status.outcome is Outcome.LIVELOCK
    assert status.flits_in_network == 1
    assert status.packets_delivered == 0
    assert trace.count(0, C(1, 0), PortId.WEST, Direction.OUT) > 10


def test_misrouting_drops_at_east_edge(mk_mesh, mk_schedule):
    config = mk_mesh(3, 3)
    attack = AttackSpec(AttackKind.MISROUTING, 0, 9, C(0, 0))
    trace, status = run_simulation(config, mk_schedule((0, (0, 0), (0, 2), 4)), [attack])
    assert status.outcome is Outcome.COMPLETED
    assert status.packets_dropped == 1 and status.flits_dropped == 4
    assert status.packets_delivered == 0
    assert trace.count(0, C(2, 0), PortId.EAST, Direction.OUT) == 4


def test_misrouting_flow_match_spares_other_flows(mk_mesh, mk_schedule):
    attack = AttackSpec(AttackKind.MISROUTING, 0, 9, C(0, 0), flow_match=(C(0, 0), C(0, 2)))
    schedule = mk_schedule((0, (0, 0), (0, 2), 2), (10, (0, 0), (1, 2), 2))
    _, status = run_simulation(mk_mesh(3, 3), schedule, [attack])
    assert status.packets_dropped == 1
    assert status.packets_delivered == 1


def test_misrouting_outside_active_quanta_is_inert(mk_mesh, mk_schedule):
    attack = AttackSpec(AttackKind.MISROUTING, 5, 9, C(0, 0))
    _, status = run_simulation(mk_mesh(3, 3), mk_schedule((0, (0, 0), (0, 2), 4)), [attack])
    assert status.packets_delivered == 1


def test_no_starvation_under_hotspot(mk_schedule):
    length, depth = 4, 4
    config = MeshConfig(3, 3, buffer_depth=depth, packet_length=length, quantum_cycles=200, total_quanta=2)
    sources = [(0, 1), (2, 1), (1, 0), (1, 2), (0, 0)]
    packets = [(k * length, s, (1, 1), length) for s in sources for k in range(3)]
    sim = Simulation(config, mk_schedule(*packets))
    status = sim.run()
    assert status.packets_delivered == len(packets)
    assert status.max_head_wait <= len(sources) * length + 2 * depth


def test_stall_windows_must_be_positive(mk_mesh):
    sim = Simulation(mk_mesh(2, 2), InjectionSchedule())
    assert detect_stall(sim) is StallKind.PROGRESS
    with pytest.raises(InvalidArgumentError):
        detect_stall(sim, deadlock_window=0)


def test_flooding_injection_cycles():
    attack = AttackSpec(AttackKind.FLOODING, 2, 3, C(0, 0), C(3, 3), rate=5)
    schedule = apply_flooding(InjectionSchedule(), attack, 50, 10, 8)
    cycles = [e.cycle for e in schedule]
    assert cycles == [100, 110, 120, 130, 140, 150, 160, 170, 180, 190]
    assert all(e.label is Label.ATTACK for e in schedule)
    assert schedule.count(Label.ATTACK) == 10


def test_flooding_raises_victim_traffic(mk_schedule):
    config = MeshConfig(4, 4, quantum_cycles=50, total_quanta=6)
    attack = AttackSpec(AttackKind.FLOODING, 2, 3, C(0, 0), C(3, 3), rate=3)
    trace, status = run_simulation(config, InjectionSchedule(), [attack])
    assert status.packets_delivered == 6
    ejected = trace.counts[:, 3, 3, PortId.LOCAL, Direction.OUT]
    assert ejected[:2].sum() == 0 and ejected[2:].sum() == 6 * config.packet_length
    assert trace.labels[2:4, 3, 3].all() and not trace.labels[:2].any()


def test_attack_outside_mesh_rejected(mk_mesh):
    attack = AttackSpec(AttackKind.FLOODING, 0, 1, C(0, 0), C(5, 5))
    with pytest.raises(InvalidArgumentError):
        run_simulation(mk_mesh(2, 2), InjectionSchedule(), [attack])


def test_seeded_runs_are_identical(mk_mesh, mk_schedule):
    schedule = mk_schedule((0, (0, 0), (2, 2), 8), (2, (2, 2), (0, 0), 8), (4, (1, 0), (1, 2), 8))
    a, _ = run_simulation(mk_mesh(3, 3, seed=5), schedule)
    b, _ = run_simulation(mk_mesh(3, 3, seed=5), schedule)
    assert a == b


@pytest.mark.parametrize("size", [4, 6])
def test_benign_traffic_conserves_and_routes_minimally(size):
    # two quanta of traffic, then enough quiet quanta to drain
    for seed in range(100):
        config = MeshConfig(size, size, quantum_cycles=20, total_quanta=8, packet_length=4, seed=seed)
        kind = PatternKind.UNIFORM if seed % 2 else PatternKind.HOTSPOT
        spec = PatternSpec(kind, rate=0.4, hotspot=C(size // 2, size // 2), hot_fraction=0.3, seed=seed)
        schedule = generate(size, size, spec, 2, config.quantum_cycles, config.packet_length)
        sim = Simulation(config, schedule)
        status = sim.run()

        assert status.outcome is Outcome.COMPLETED, seed
        assert status.packets_injected == len(schedule)
        assert status.packets_injected == status.packets_delivered + status.packets_dropped + status.packets_in_flight
        assert status.flits_injected == status.flits_delivered + status.flits_dropped + sim.buffered_flits()
        assert status.packets_dropped == 0 and status.packets_in_flight == 0
        for rec in sim.packets.values():
            assert rec.delivered
            assert rec.hops == rec.src.manhattan(rec.dest), (seed, rec)


def test_monitor_does_not_change_the_run():
    config = MeshConfig(4, 4, quantum_cycles=25, total_quanta=6, packet_length=4, seed=3)
    spec = PatternSpec(PatternKind.UNIFORM, rate=1.5, seed=3)
    schedule = generate(4, 4, spec, 6, config.quantum_cycles, config.packet_length)
    flood = AttackSpec(AttackKind.FLOODING, 1, 3, C(0, 0), victim=C(3, 3), rate=2)

    trace, watched = run_simulation(config, schedule, [flood], monitor=True)
    none, unwatched = run_simulation(config, schedule, [flood], monitor=False)
    assert trace is not None and none is None
    assert watched == unwatched
    assert watched.ledger == unwatched.ledger


def test_idle_cycles_do_not_restart_the_livelock_count(mk_schedule):
    config = MeshConfig(2, 2, buffer_depth=4, quantum_cycles=100, total_quanta=20, deadlock_window=200, packet_length=8)
    schedule = mk_schedule(
        (0, (0, 0), (1, 1), 8), (0, (1, 0), (0, 1), 8), (0, (1, 1), (0, 0), 8), (0, (0, 1), (1, 0), 8),
    )
    attacks = [
        AttackSpec(AttackKind.DEADLOCK_TAMPER, 0, 19, C(0, 0), flow_match=(C(0, 0), C(1, 1))),
        AttackSpec(AttackKind.DEADLOCK_TAMPER, 0, 19, C(1, 1), flow_match=(C(1, 1), C(0, 0))),
    ]
    sim = Simulation(config, schedule, build_hooks(config, attacks))
    for _ in range(100):
        sim.step_cycle()
        if sim.idle_streak:
            break
    assert sim.idle_streak == 1
    moving = sim.sinkless_streak
    assert moving > 0
    for _ in range(20):
        sim.step_cycle()
    assert sim.idle_streak == 21
    assert sim.sinkless_streak == moving


def test_flooding_raises_every_attacked_quantum_at_the_victim():
    config = MeshConfig(4, 4, quantum_cycles=40, total_quanta=8, packet_length=4, seed=5)
    spec = PatternSpec(PatternKind.UNIFORM, rate=0.2, seed=5)
    schedule = generate(4, 4, spec, 8, config.quantum_cycles, config.packet_length)
    victim = C(3, 3)
    flood = AttackSpec(AttackKind.FLOODING, 2, 5, C(0, 0), victim, rate=2)

    benign, _ = run_simulation(config, schedule)
    attacked, status = run_simulation(config, schedule, [flood])
    assert status.outcome is Outcome.COMPLETED
    before = extract_series(benign, victim).samples
    after = extract_series(attacked, victim).samples
    assert (after[2:6] > before[2:6]).all()
    assert after[:2].tolist() == before[:2].tolist()
    assert attacked.labels[2:6, victim.y, victim.x].all()
