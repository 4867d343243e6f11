"""
Run configs are line-oriented:

    [mesh]
    width = 6
    ; comment
    [attack]        # repeatable
    kind = flooding

Every problem is reported as a ConfigError carrying the 1-based line.
"""
from __future__ import annotations
from noc_sentinel.analysis.clustering import Algorithm, Linkage
from noc_sentinel.analysis.distance import Metric
from noc_sentinel.config import (
    DEFAULT_ALGORITHM,
    DEFAULT_BUFFER_DEPTH,
    DEFAULT_DEADLOCK_WINDOW,
    DEFAULT_FLOOR,
    DEFAULT_K,
    DEFAULT_METRIC,
    DEFAULT_PACKET_LENGTH,
    DEFAULT_PERCENTILE,
    DEFAULT_QUANTUM_CYCLES,
    SEED_ENV_VAR,
)
from noc_sentinel.errors import ConfigError, InvalidArgumentError
from noc_sentinel.ids.windows import Normalization, WindowSpec
from noc_sentinel.monitor.trace import AGGREGATE_IN, Selector
from noc_sentinel.noc.types import Coordinate, MeshConfig, PortId
from noc_sentinel.workload.attacks import AttackKind, AttackSpec
from noc_sentinel.workload.patterns import PatternKind, PatternSpec
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping
from loguru import logger
import os


@dataclass(frozen=True)
class IdsParams:
    window: WindowSpec = WindowSpec()
    k: int = DEFAULT_K
    metric: Metric = field(default_factory=lambda: Metric.parse(DEFAULT_METRIC))
    algorithm: Algorithm = Algorithm(DEFAULT_ALGORITHM)
    linkage: Linkage = Linkage.AVERAGE
    percentile: float = DEFAULT_PERCENTILE
    floor: float = DEFAULT_FLOOR
    selector: Selector = AGGREGATE_IN


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshConfig
    traffic: PatternSpec | None = None
    attacks: tuple[AttackSpec, ...] = ()
    ids: IdsParams = IdsParams()


@dataclass
class _Section:
    name: str
    line: int
    values: dict[str, tuple[str, int]] = field(default_factory=dict)

    def take(self, key: str, convert: Callable[[str], Any], default: Any = None) -> Any:
        if key not in self.values:
            return default
        raw, line = self.values[key]
        try:
            return convert(raw)
        except (ValueError, KeyError, InvalidArgumentError) as e:
            raise ConfigError(f"[{self.name}] bad value for {key}: {raw!r} ({e})", line) from e

    def require(self, key: str, convert: Callable[[str], Any]) -> Any:
        if key not in self.values:
            raise ConfigError(f"[{self.name}] missing required key {key!r}", self.line)
        return self.take(key, convert)

    def line_of(self, key: str) -> int:
        return self.values[key][1] if key in self.values else self.line


_KEYS = {
    "mesh": {"width", "height", "buffer_depth", "packet_length", "quantum_cycles", "total_quanta",
             "seed", "deadlock_window", "livelock_window"},
    "traffic": {"pattern", "rate", "hotspot", "hot_fraction", "period", "ramp", "burst",
                "phase_step", "jitter", "seed"},
    "attack": {"kind", "start", "end", "attacker", "victim", "rate", "flow", "deflect"},
    "ids": {"width", "stride", "k", "metric", "algorithm", "linkage", "normalization",
            "percentile", "floor", "selector"},
}
_REPEATABLE = {"attack"}


def _split(text: str) -> list[_Section]:
    """
    Cut a run config into its bracketed sections.

    Keys are lower-cased and blank, `#` and `;` lines dropped. A repeated
    [attack] header opens a new entry, any other repeat is an error.
    """
    sections: list[_Section] = []
    current: _Section | None = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", n)
            name = line[1:-1].strip().lower()
            if name not in _KEYS:
                raise ConfigError(f"unknown section [{name}]", n)
            if name not in _REPEATABLE and any(s.name == name for s in sections):
                raise ConfigError(f"duplicate section [{name}]", n)
            current = _Section(name, n)
            sections.append(current)
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {line!r}", n)
        if current is None:
            raise ConfigError(f"key {key!r} outside any section", n)
        if key not in _KEYS[current.name]:
            raise ConfigError(f"unknown key {key!r} in [{current.name}]", n)
        if key in current.values:
            raise ConfigError(f"duplicate key {key!r} in [{current.name}]", n)
        current.values[key] = (value.strip(), n)
    return sections


def _flow(text: str) -> tuple[Coordinate, Coordinate]:
    src, sep, dest = text.partition(">")
    if not sep:
        raise ValueError("flow must be written 'x,y>x,y'")
    return Coordinate.parse(src), Coordinate.parse(dest)


def _in_mesh(section: _Section, key: str, c: Coordinate | None, mesh: MeshConfig) -> None:
    if c is not None and not mesh.contains(c):
        raise ConfigError(f"[{section.name}] {key} {c} is outside the {mesh.width}x{mesh.height} mesh", section.line_of(key))


def _mesh(s: _Section, seed_override: int | None) -> MeshConfig:
    seed = s.take("seed", int, 0) if seed_override is None else seed_override
    try:
        return MeshConfig(
            width=s.require("width", int),
            height=s.require("height", int),
            buffer_depth=s.take("buffer_depth", int, DEFAULT_BUFFER_DEPTH),
            quantum_cycles=s.take("quantum_cycles", int, DEFAULT_QUANTUM_CYCLES),
            total_quanta=s.take("total_quanta", int, 1),
            seed=seed,
            packet_length=s.take("packet_length", int, DEFAULT_PACKET_LENGTH),
            deadlock_window=s.take("deadlock_window", int, DEFAULT_DEADLOCK_WINDOW),
            livelock_window=s.take("livelock_window", int, None),
        )
    except ConfigError as e:
        if e.line is not None:
            raise
        raise ConfigError(f"[mesh] {e}", s.line) from e


def _traffic(s: _Section, mesh: MeshConfig, seed_override: int | None) -> PatternSpec | None:
    pattern = s.require("pattern", str).lower()
    if pattern == "none":
        return None
    kind = s.take("pattern", lambda v: PatternKind(v.lower()))
    hotspot = s.take("hotspot", Coordinate.parse)
    _in_mesh(s, "hotspot", hotspot, mesh)
    if "seed" in s.values:
        seed = s.take("seed", int)
    else:
        seed = seed_override if seed_override is not None else mesh.seed
    try:
        return PatternSpec(
            kind=kind,
            rate=s.take("rate", float, 1.0),
            hotspot=hotspot,
            hot_fraction=s.take("hot_fraction", float, 0.0),
            period=s.take("period", int, PatternSpec.period),
            ramp=s.take("ramp", int, PatternSpec.ramp),
            burst=s.take("burst", int, PatternSpec.burst),
            phase_step=s.take("phase_step", int, 0),
            jitter=s.take("jitter", int, 0),
            seed=seed,
        )
    except InvalidArgumentError as e:
        raise ConfigError(f"[traffic] {e}", s.line) from e


def _attack(s: _Section, mesh: MeshConfig) -> AttackSpec:
    kind = s.require("kind", lambda v: AttackKind(v.lower()))
    attacker = s.require("attacker", Coordinate.parse)
    victim = s.take("victim", Coordinate.parse)
    flow = s.take("flow", _flow)
    _in_mesh(s, "attacker", attacker, mesh)
    _in_mesh(s, "victim", victim, mesh)
    if flow is not None:
        _in_mesh(s, "flow", flow[0], mesh)
        _in_mesh(s, "flow", flow[1], mesh)
    try:
        return AttackSpec(
            kind=kind,
            start_quantum=s.take("start", int, 0),
            end_quantum=s.take("end", int, mesh.total_quanta - 1),
            attacker=attacker,
            victim=victim,
            rate=s.take("rate", int, 1),
            flow_match=flow,
            deflect=s.take("deflect", PortId.from_short),
        )
    except InvalidArgumentError as e:
        raise ConfigError(f"[attack] {e}", s.line) from e


def _ids(s: _Section) -> IdsParams:
    d = IdsParams()
    try:
        window = WindowSpec(
            s.take("width", int, d.window.width),
            s.take("stride", int, d.window.stride),
            s.take("normalization", Normalization, d.window.normalization),
        )
    except InvalidArgumentError as e:
        raise ConfigError(f"[ids] {e}", s.line) from e
    params = IdsParams(
        window=window,
        k=s.take("k", int, d.k),
        metric=s.take("metric", Metric.parse, d.metric),
        algorithm=s.take("algorithm", Algorithm.parse, d.algorithm),
        linkage=s.take("linkage", Linkage, d.linkage),
        percentile=s.take("percentile", float, d.percentile),
        floor=s.take("floor", float, d.floor),
        selector=s.take("selector", Selector.parse, d.selector),
    )
    if params.k < 1:
        raise ConfigError("[ids] k must be >= 1", s.line_of("k"))
    if not 0 < params.percentile <= 100:
        raise ConfigError("[ids] percentile must be in (0, 100]", s.line_of("percentile"))
    return params


def seed_override(env: Mapping[str, str] | None = None) -> int | None:
    env = os.environ if env is None else env
    raw = env.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from e


def parse_run_config(text: str, env: Mapping[str, str] | None = None) -> RunConfig:
    sections = _split(text)
    by_name = {s.name: s for s in sections if s.name not in _REPEATABLE}
    if "mesh" not in by_name:
        raise ConfigError("missing [mesh] section", 1)
    override = seed_override(env)
    if override is not None:
        logger.info(f"{SEED_ENV_VAR}={override} overrides the configured seed")
    mesh = _mesh(by_name["mesh"], override)
    traffic = _traffic(by_name["traffic"], mesh, override) if "traffic" in by_name else None
    attacks = tuple(_attack(s, mesh) for s in sections if s.name == "attack")
    ids = _ids(by_name["ids"]) if "ids" in by_name else IdsParams()
    return RunConfig(mesh, traffic, attacks, ids)


def load_run_config(path: Path, env: Mapping[str, str] | None = None) -> RunConfig:
    return parse_run_config(Path(path).read_text(encoding="utf-8"), env)
