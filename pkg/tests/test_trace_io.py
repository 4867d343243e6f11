from noc_sentinel.errors import TraceParseError
from noc_sentinel.monitor.trace import (
    AGGREGATE_IN,
    AGGREGATE_OUT,
    Selector,
    TraceMeta,
    TrafficTrace,
    extract_series,
    port_totals,
)
from noc_sentinel.monitor.trace_io import labels_path_for, read_labels, read_trace, write_labels, write_trace
from noc_sentinel.noc.types import Coordinate, Direction, PortId
from pathlib import Path
import numpy as np
import pytest

# 8 metadata lines, then the header on line 9; data row r sits on line 10 + r
FIRST_ROW = 10


def _sample_trace() -> TrafficTrace:
    meta = TraceMeta(2, 1, 20, 2, seed=9, workload="unit", attacks="flooding:q1-1:at=0,0:victim=1,0:rate=1")
    rng = np.random.default_rng(0)
    counts = rng.integers(0, 21, size=meta.shape)
    labels = np.zeros(meta.shape[:3], dtype=bool)
    labels[1, 0, 1] = True
    return TrafficTrace(meta, counts, labels)


@pytest.fixture
def written(tmp_path: Path) -> Path:
    path = tmp_path / "t.csv"
    write_trace(_sample_trace(), path)
    return path


def _edit(path: Path, fn) -> None:
    lines = path.read_text(encoding="utf-8").split("\n")
    fn(lines)
    path.write_text("\n".join(lines), encoding="utf-8")


def test_round_trip_with_sidecar(written: Path):
    assert labels_path_for(written).exists()
    back = read_trace(written)
    assert back == _sample_trace()
    assert back.attacked


def test_layout(written: Path):
    lines = written.read_text(encoding="utf-8").split("\n")
    assert lines[0] == "# width=2"
    assert lines[FIRST_ROW - 2] == "quantum,x,y,port,dir,count"
    assert lines[FIRST_ROW - 1].startswith("0,0,0,L,in,")
    assert lines[FIRST_ROW].startswith("0,0,0,L,out,")
    assert lines[FIRST_ROW + 1].startswith("0,0,0,E,in,")
    assert len(lines) == FIRST_ROW - 1 + 40 + 1


def test_missing_sidecar_means_attack_free(written: Path):
    labels_path_for(written).unlink()
    back = read_trace(written)
    assert not back.attacked
    np.testing.assert_array_equal(back.counts, _sample_trace().counts)


def test_explicit_missing_sidecar_raises(written: Path, tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        read_trace(written, tmp_path / "nope.csv")


def _set_count(value: str):
    def fn(lines):
        parts = lines[FIRST_ROW - 1].split(",")
        parts[-1] = value
        lines[FIRST_ROW - 1] = ",".join(parts)
    return fn


@pytest.mark.parametrize("value,reason", [("-1", "negative"), ("abc", "non-numeric"), ("21", "exceeds")])
def test_bad_count_reports_line(written: Path, value, reason):
    _edit(written, _set_count(value))
    with pytest.raises(TraceParseError, match=reason) as e:
        read_trace(written)
    assert e.value.line == FIRST_ROW


def test_truncated(written: Path):
    _edit(written, lambda lines: lines.pop(-2))
    with pytest.raises(TraceParseError, match="truncated") as e:
        read_trace(written)
    assert e.value.line == FIRST_ROW + 39


def test_extra_row(written: Path):
    _edit(written, lambda lines: lines.insert(-1, "2,0,0,L,in,0"))
    with pytest.raises(TraceParseError, match="extra") as e:
        read_trace(written)
    assert e.value.line == FIRST_ROW + 40


def test_rows_out_of_order(written: Path):
    def swap(lines):
        i = FIRST_ROW - 1
        lines[i], lines[i + 1] = lines[i + 1], lines[i]
    _edit(written, swap)
    with pytest.raises(TraceParseError, match="out of order") as e:
        read_trace(written)
    assert e.value.line == FIRST_ROW


def test_malformed_row(written: Path):
    def extra_field(lines):
        lines[FIRST_ROW] += ",7"
    _edit(written, extra_field)
    with pytest.raises(TraceParseError) as e:
        read_trace(written)
    assert e.value.line == FIRST_ROW + 1


def test_bad_header(written: Path):
    _edit(written, lambda lines: lines.__setitem__(FIRST_ROW - 2, "quantum,x,y,port,direction,count"))
    with pytest.raises(TraceParseError, match="expected header") as e:
        read_trace(written)
    assert e.value.line == FIRST_ROW - 1


@pytest.mark.parametrize("line,match", [("# colour=blue", "unknown metadata"), ("# width=3", "duplicate"), ("# width", "malformed")])
def test_bad_metadata(written: Path, line, match):
    _edit(written, lambda lines: lines.insert(0, line))
    with pytest.raises(TraceParseError, match=match) as e:
        read_trace(written)
    assert e.value.line in (1, 2)


def test_missing_metadata(written: Path):
    _edit(written, lambda lines: lines.pop(0))
    with pytest.raises(TraceParseError, match="width"):
        read_trace(written)


def test_labels_infer_quanta(tmp_path: Path):
    labels = np.zeros((3, 2, 2), dtype=bool)
    labels[2, 1, 0] = True
    path = tmp_path / "l.csv"
    write_labels(labels, path)
    np.testing.assert_array_equal(read_labels(path, 2, 2), labels)
    with pytest.raises(TraceParseError):
        read_labels(path, 3, 2)


def test_label_flag_must_be_binary(tmp_path: Path):
    path = tmp_path / "l.csv"
    write_labels(np.zeros((1, 1, 2), dtype=bool), path)
    _edit(path, lambda lines: lines.__setitem__(1, "0,0,0,2"))
    with pytest.raises(TraceParseError, match="exceeds") as e:
        read_labels(path, 2, 1)
    assert e.value.line == 2


def test_series_selection():
    trace = _sample_trace()
    r = Coordinate(1, 0)
    cell = trace.counts[:, 0, 1]
    np.testing.assert_array_equal(extract_series(trace, r).samples, cell[:, :, Direction.IN].sum(axis=1))
    np.testing.assert_array_equal(extract_series(trace, r, AGGREGATE_OUT).samples, cell[:, :, Direction.OUT].sum(axis=1))
    east_in = extract_series(trace, r, Selector.parse("E:in"))
    np.testing.assert_array_equal(east_in.samples, cell[:, PortId.EAST, Direction.IN])
    assert str(Selector.parse("E:in")) == "E:in" and str(AGGREGATE_IN) == "in"


def test_port_totals():
    trace = _sample_trace()
    df = port_totals(trace)
    assert len(df) == 2 * 5 * 2
    row = df[(df.x == 1) & (df.y == 0) & (df.port == "N") & (df.dir == "out")]
    assert int(row["count"].iloc[0]) == trace.counts[:, 0, 1, PortId.NORTH, Direction.OUT].sum()
