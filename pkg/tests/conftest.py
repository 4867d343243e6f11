from noc_sentinel.monitor.trace import TraceMeta, TrafficTrace
from noc_sentinel.noc.types import Coordinate, MeshConfig
from noc_sentinel.workload.schedule import InjectionSchedule, ScheduleEntry
from loguru import logger
import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _quiet_logs():
    logger.remove()
    yield


@pytest.fixture
def mk_schedule():
    """Build a schedule from (cycle, (sx, sy), (dx, dy), length) tuples."""
    def _mk(*packets) -> InjectionSchedule:
        entries = [
            ScheduleEntry(cycle, Coordinate(*src), Coordinate(*dest), length)
            for cycle, src, dest, length in sorted(packets, key=lambda p: p[0])
        ]
        return InjectionSchedule(tuple(entries), "test")
    return _mk


@pytest.fixture
def mk_mesh():
    def _mk(width: int, height: int, **kw) -> MeshConfig:
        kw.setdefault("quantum_cycles", 100)
        kw.setdefault("total_quanta", 10)
        return MeshConfig(width, height, **kw)
    return _mk


@pytest.fixture
def mk_trace():
    """
    Trace whose Local-in count at every router follows `series(x, y)`,
    a function returning one value per quantum.
    """
    def _mk(width: int, height: int, series, quantum_cycles: int = 50, labels=None) -> TrafficTrace:
        first = np.asarray(series(0, 0))
        quanta = len(first)
        meta = TraceMeta(width, height, quantum_cycles, quanta, seed=0)
        counts = np.zeros(meta.shape, dtype=np.int64)
        for y in range(height):
            for x in range(width):
                counts[:, y, x, 0, 0] = np.asarray(series(x, y), dtype=np.int64)
        return TrafficTrace(meta, counts, labels)
    return _mk
