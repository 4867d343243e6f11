from noc_sentinel.config import (
    BENCH_FILE,
    CONFIGS_DIR,
    DEFAULT_ALGORITHM,
    DEFAULT_FLOOR,
    DEFAULT_HIST_BINS,
    DEFAULT_K,
    DEFAULT_METRIC,
    DEFAULT_PERCENTILE,
    DEFAULT_STRIDE,
    DEFAULT_WINDOW,
    DICTIONARY_FILE,
    LOG_LEVEL_ENV_VAR,
    MAX_WORKERS,
    REPORTS_DIR,
    RESIDUALS_DIR,
    SEED_ENV_VAR,
    TRACES_DIR,
    ensure_project_dirs,
)
from noc_sentinel.analysis.clustering import Algorithm, Linkage
from noc_sentinel.analysis.distance import Metric
from noc_sentinel.analysis.features import window_features
from noc_sentinel.errors import ConfigError, InvalidArgumentError, TraceParseError
from noc_sentinel.ids.benchmark import gen_shape_benchmark, run_benchmark
from noc_sentinel.ids.detection import detect, evaluate_detection, read_report, write_report, write_residuals
from noc_sentinel.ids.dictionary import read_dictionary, router_windows, train_dictionary, write_dictionary
from noc_sentinel.ids.windows import Normalization, WindowSpec
from noc_sentinel.monitor.trace import Selector, port_totals
from noc_sentinel.monitor.trace_io import labels_path_for, read_labels, read_trace, write_trace
from noc_sentinel.noc.simulation import run_simulation
from noc_sentinel.noc.types import Outcome
from noc_sentinel.pipeline.runconfig import IdsParams, load_run_config
from noc_sentinel.workload.patterns import generate
from noc_sentinel.workload.schedule import InjectionSchedule
from typing import Callable, Optional, Sequence
from pathlib import Path
from loguru import logger
import pandas as pd
import argparse
import os
import sys

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DEADLOCK = 3
EXIT_LIVELOCK = 4
EXIT_ANOMALY = 5

_OUTCOME_CODES = {
    Outcome.COMPLETED: EXIT_OK,
    Outcome.DEADLOCK: EXIT_DEADLOCK,
    Outcome.LIVELOCK: EXIT_LIVELOCK,
}


def _banner(title: str, lines: Sequence[str]) -> None:
    print(f"\n{'=' * 60}")
    print(title)
    for line in lines:
        print(f"  {line}")
    print(f"{'=' * 60}")


# ------------------ commands ------------------

def cmd_simulate(config: Path, out: Path, labels: Optional[Path] = None, seed: Optional[int] = None) -> int:
    """
    Simulate the configured mesh and write its trace plus label sidecar.

    Exit code follows the run outcome: 0 completed, 3 deadlock, 4 livelock.
    """
    env = dict(os.environ)
    if seed is not None:
        env[SEED_ENV_VAR] = str(seed)
    cfg = load_run_config(config, env)
    mesh = cfg.mesh
    if cfg.traffic is None:
        schedule = InjectionSchedule()
    else:
        schedule = generate(mesh.width, mesh.height, cfg.traffic, mesh.total_quanta, mesh.quantum_cycles, mesh.packet_length)
    trace, status = run_simulation(mesh, schedule, cfg.attacks)
    sidecar = write_trace(trace, out, labels)
    _banner("Simulation Summary:", [
        status.summary(),
        f"flits injected={status.flits_injected} delivered={status.flits_delivered} "
        f"dropped={status.flits_dropped} in_network={status.flits_in_network}",
        f"max head-of-line wait={status.max_head_wait} cycles",
        f"trace={out}",
        f"labels={sidecar}",
    ])
    return _OUTCOME_CODES[status.outcome]


def cmd_train(
    traces: Sequence[Path],
    out: Path,
    width: Optional[int] = None,
    stride: Optional[int] = None,
    k: Optional[int] = None,
    metric: Optional[str] = None,
    algorithm: Optional[str] = None,
    percentile: Optional[float] = None,
    seed: int = 0,
    normalization: Optional[str] = None,
    floor: Optional[float] = None,
    workers: int = 1,
    labels: Optional[Sequence[Path]] = None,
    linkage: Optional[str] = None,
    selector: Optional[str] = None,
    config: Optional[Path] = None,
) -> int:
    """
    Train a shape dictionary on attack-free traces.

    Parameters left as None come from the [ids] section of `config`, or from
    the built-in defaults when no config is given.
    """
    if labels is not None and len(labels) != len(traces):
        raise InvalidArgumentError("--labels needs one sidecar per --trace")
    ids = load_run_config(config).ids if config is not None else IdsParams()
    spec = WindowSpec(
        ids.window.width if width is None else width,
        ids.window.stride if stride is None else stride,
        ids.window.normalization if normalization is None else Normalization(normalization),
    )

    sidecars = list(labels) if labels is not None else [None] * len(traces)
    loaded = []
    for i, (t, sidecar) in enumerate(zip(traces, sidecars), start=1):
        logger.info(f"[{i}/{len(traces)}] reading {t}")
        loaded.append(read_trace(t, sidecar))

    dictionary = train_dictionary(
        loaded,
        spec=spec,
        k=ids.k if k is None else k,
        algorithm=ids.algorithm if algorithm is None else Algorithm.parse(algorithm),
        metric=ids.metric if metric is None else Metric.parse(metric),
        seed=seed,
        percentile=ids.percentile if percentile is None else percentile,
        floor=ids.floor if floor is None else floor,
        selector=ids.selector if selector is None else Selector.parse(selector),
        linkage=ids.linkage if linkage is None else Linkage(linkage),
        fingerprint="|".join(Path(t).name for t in traces),
        workers=workers,
    )
    write_dictionary(dictionary, out)
    _banner("Training Summary:", [
        f"traces={len(traces)} k={dictionary.k} algorithm={dictionary.algorithm.value} metric={dictionary.metric}",
        f"window={spec.width} stride={spec.stride} normalization={spec.normalization.value}",
        f"cluster sizes={list(dictionary.sizes)}",
        f"dictionary={out}",
    ])
    return EXIT_OK


def cmd_detect(trace: Path, dictionary: Path, out: Path, residuals: Optional[Path] = None, workers: int = 1) -> int:
    """Write the detection report; exit 5 when any window is anomalous."""
    d = read_dictionary(dictionary)
    report = detect(read_trace(trace), d, workers)
    write_report(report, out)
    lines = [report.summary(), f"report={out}"]
    if residuals is not None:
        written = write_residuals(report, residuals)
        lines.append(f"residual files={len(written)} in {residuals}")
    _banner("Detection Summary:", lines)
    return EXIT_ANOMALY if report.anomalies else EXIT_OK


def cmd_evaluate(report: Path, labels: Path) -> int:
    r = read_report(report)
    truth = read_labels(labels, r.mesh_width, r.mesh_height)
    metrics = evaluate_detection(r, truth)
    for line in metrics.lines():
        print(line)
    return EXIT_OK


def cmd_bench_shapes(
    families: int = 6,
    noise: float = 0.0,
    seed: int = 0,
    count: int = 20,
    width: int = 32,
    k: Optional[int] = None,
    linkage: str = Linkage.AVERAGE.value,
    workers: int = 1,
    out: Optional[Path] = None,
) -> int:
    """Print the algorithm x metric index table as CSV on stdout."""
    bench = gen_shape_benchmark(families, count, noise, width, seed)
    table = run_benchmark(bench, k, seed=seed, linkage=Linkage(linkage), workers=workers)
    csv_text = table.to_csv(index=False, float_format="%.3f", lineterminator="\n")
    print(csv_text, end="")
    if out is not None:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(csv_text, encoding="utf-8")
    return EXIT_OK


def cmd_entropy(
    trace: Path,
    out: Path,
    width: int = DEFAULT_WINDOW,
    stride: int = DEFAULT_STRIDE,
    bins: int = DEFAULT_HIST_BINS,
    q: float = 2.0,
    base: float = 2.0,
    selector: str = "in",
) -> int:
    """Per-router, per-window Shannon/Tsallis/Renyi features as CSV."""
    t = read_trace(trace)
    spec = WindowSpec(width, stride)
    rows = []
    for router, windows in router_windows(t, spec, Selector.parse(selector)):
        for start, w in zip(spec.starts(t.meta.total_quanta), windows):
            shannon, tsallis, renyi = window_features(w, bins, q, base)
            rows.append((router.x, router.y, start, repr(float(shannon)), repr(float(tsallis)), repr(float(renyi))))
    df = pd.DataFrame(rows, columns=["x", "y", "window_start", "shannon", "tsallis", "renyi"])
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(out, index=False, lineterminator="\n")
    print(f"Wrote {len(df)} feature rows to {out}")
    return EXIT_OK


def cmd_ports(trace: Path, out: Path) -> int:
    df = port_totals(read_trace(trace))
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(out, index=False, lineterminator="\n")
    print(f"Wrote {len(df)} port totals to {out}")
    return EXIT_OK


# ------------------ reproduction steps ------------------

SCENARIO_TRAIN_SEEDS = (1, 2, 3)
SCENARIO_HOLDOUT_SEED = 4
BENIGN_CONFIG = CONFIGS_DIR / "periodic_benign_6x6.ini"
FLOODING_CONFIG = CONFIGS_DIR / "periodic_flooding_6x6.ini"


def scenario_trace(name: str) -> Path:
    return TRACES_DIR / f"{name}.csv"


def step_00_simulate() -> None:
    """Benign training traces, a held-out benign trace and its flooded twin."""
    for seed in (*SCENARIO_TRAIN_SEEDS, SCENARIO_HOLDOUT_SEED):
        cmd_simulate(BENIGN_CONFIG, scenario_trace(f"benign_seed{seed}"), seed=seed)
    cmd_simulate(FLOODING_CONFIG, scenario_trace("flooding"), seed=SCENARIO_HOLDOUT_SEED)


def step_01_train() -> None:
    """Window, k and metric come from the [ids] section of the benign config."""
    traces = [scenario_trace(f"benign_seed{s}") for s in SCENARIO_TRAIN_SEEDS]
    cmd_train(traces, DICTIONARY_FILE, seed=SCENARIO_TRAIN_SEEDS[0], workers=MAX_WORKERS, config=BENIGN_CONFIG)


def step_02_detect() -> None:
    for name in (f"benign_seed{SCENARIO_HOLDOUT_SEED}", "flooding"):
        cmd_detect(scenario_trace(name), DICTIONARY_FILE, REPORTS_DIR / f"{name}.report.csv", RESIDUALS_DIR / name)


def step_03_evaluate() -> None:
    for name in (f"benign_seed{SCENARIO_HOLDOUT_SEED}", "flooding"):
        print(f"--- {name} ---")
        cmd_evaluate(REPORTS_DIR / f"{name}.report.csv", labels_path_for(scenario_trace(name)))


def step_04_bench_shapes() -> None:
    cmd_bench_shapes(noise=0.0, out=BENCH_FILE)
    cmd_bench_shapes(noise=0.05, out=BENCH_FILE.with_name("bench_shapes_noisy.csv"), workers=MAX_WORKERS)


# ------------------ CLI ------------------

def _parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """
    Parse CLI arguments for the simulator, the IDS and the shape benchmark.
    """
    p = argparse.ArgumentParser(
        prog="noc-sentinel",
        description="NoC DoS simulator and shape-dictionary intrusion detector.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="Run a mesh simulation and write its trace")
    s.add_argument("--config", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--labels", type=Path, default=None, help="Label sidecar path (default: <out>.labels.csv)")
    s.add_argument("--seed", type=int, default=None, help=f"Overrides the config seed and {SEED_ENV_VAR}")

    t = sub.add_parser("train", help="Learn a shape dictionary from attack-free traces")
    t.add_argument("--trace", type=Path, nargs="+", required=True)
    t.add_argument("--out", type=Path, required=True)
    t.add_argument("--config", type=Path, default=None, help="Run config whose [ids] section supplies the defaults below")
    t.add_argument("--labels", type=Path, nargs="+", default=None)
    t.add_argument("--width", type=int, default=None, help=f"default {DEFAULT_WINDOW}")
    t.add_argument("--stride", type=int, default=None, help=f"default {DEFAULT_STRIDE}")
    t.add_argument("--k", type=int, default=None, help=f"default {DEFAULT_K}")
    t.add_argument("--metric", type=str, default=None, help=f"default {DEFAULT_METRIC}")
    t.add_argument("--algo", type=str, default=None, help=f"default {DEFAULT_ALGORITHM}")
    t.add_argument("--linkage", type=str, default=None, choices=[m.value for m in Linkage])
    t.add_argument("--percentile", type=float, default=None, help=f"default {DEFAULT_PERCENTILE}")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--normalization", type=str, default=None, choices=[n.value for n in Normalization])
    t.add_argument("--floor", type=float, default=None, help=f"default {DEFAULT_FLOOR}")
    t.add_argument("--selector", type=str, default=None, help="in, out or <port>:<dir> (default in)")
    t.add_argument("--workers", type=int, default=1)

    d = sub.add_parser("detect", help="Flag anomalous windows of a trace")
    d.add_argument("--trace", type=Path, required=True)
    d.add_argument("--dict", type=Path, required=True)
    d.add_argument("--out", type=Path, required=True)
    d.add_argument("--residuals", type=Path, default=None, help="Directory for per-window residual CSVs")
    d.add_argument("--workers", type=int, default=1)

    e = sub.add_parser("evaluate", help="Score a detection report against ground truth")
    e.add_argument("--report", type=Path, required=True)
    e.add_argument("--labels", type=Path, required=True)

    b = sub.add_parser("bench-shapes", help="Cluster the synthetic shape benchmark")
    b.add_argument("--families", type=int, default=6)
    b.add_argument("--noise", type=float, default=0.0)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--count", type=int, default=20)
    b.add_argument("--width", type=int, default=32)
    b.add_argument("--k", type=int, default=None)
    b.add_argument("--linkage", type=str, default=Linkage.AVERAGE.value, choices=[m.value for m in Linkage])
    b.add_argument("--workers", type=int, default=1)

    n = sub.add_parser("entropy", help="Per-window entropy features of a trace")
    n.add_argument("--trace", type=Path, required=True)
    n.add_argument("--out", type=Path, required=True)
    n.add_argument("--width", type=int, default=DEFAULT_WINDOW)
    n.add_argument("--stride", type=int, default=DEFAULT_STRIDE)
    n.add_argument("--bins", type=int, default=DEFAULT_HIST_BINS)
    n.add_argument("--q", type=float, default=2.0)
    n.add_argument("--base", type=float, default=2.0)
    n.add_argument("--selector", type=str, default="in")

    o = sub.add_parser("ports", help="Per-port flit totals of a trace")
    o.add_argument("--trace", type=Path, required=True)
    o.add_argument("--out", type=Path, required=True)

    return p.parse_args(argv)


def _dispatch(args: argparse.Namespace) -> Callable[[], int]:
    match args.command:
        case "simulate":
            return lambda: cmd_simulate(args.config, args.out, args.labels, args.seed)
        case "train":
            return lambda: cmd_train(
                args.trace, args.out, args.width, args.stride, args.k, args.metric, args.algo,
                args.percentile, args.seed, args.normalization, args.floor, args.workers,
                args.labels, args.linkage, args.selector, args.config,
            )
        case "detect":
            return lambda: cmd_detect(args.trace, args.dict, args.out, args.residuals, args.workers)
        case "evaluate":
            return lambda: cmd_evaluate(args.report, args.labels)
        case "bench-shapes":
            return lambda: cmd_bench_shapes(
                args.families, args.noise, args.seed, args.count, args.width, args.k, args.linkage, args.workers,
            )
        case "entropy":
            return lambda: cmd_entropy(args.trace, args.out, args.width, args.stride, args.bins, args.q, args.base, args.selector)
        case _:
            return lambda: cmd_ports(args.trace, args.out)


def configure_logging() -> None:
    logger.remove()
    logger.add(sys.stderr, level=os.environ.get(LOG_LEVEL_ENV_VAR, "INFO").upper())


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    try:
        args = _parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help and 2 for usage errors
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return _dispatch(args)()
    except (ConfigError, InvalidArgumentError, TraceParseError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE
    except FileNotFoundError as e:
        logger.error(f"{args.command}: file not found: {e.filename}")
        return EXIT_USAGE


def run_steps(from_step: int, to_step: int) -> None:
    ensure_project_dirs()
    steps = {
        0: ("simulate", step_00_simulate),
        1: ("train", step_01_train),
        2: ("detect", step_02_detect),
        3: ("evaluate", step_03_evaluate),
        4: ("bench_shapes", step_04_bench_shapes),
    }
    if from_step > to_step:
        raise ValueError("--from-step must be <= --to-step")
    for i in range(from_step, to_step + 1):
        name, fn = steps[i]
        print(f"\n=== Step {i}: {name} ===")
        try:
            fn()
        except Exception as e:
            raise RuntimeError(f"Failed at step {i}: {name}") from e
    print("\nDone.")
