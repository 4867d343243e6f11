from pathlib import Path
import os

# ------------------ Directories ------------------

ROOT_DIR = Path(__file__).resolve().parents[2]                             # repository root (src/noc_sentinel -> ..)

CONFIGS_DIR = ROOT_DIR / "configs"

# ------------------ DATA Directories ------------------

DATA_DIR = ROOT_DIR / "data"
TRACES_DIR = DATA_DIR / "traces"
DICTIONARIES_DIR = DATA_DIR / "dictionaries"
REPORTS_DIR = DATA_DIR / "reports"
RESIDUALS_DIR = REPORTS_DIR / "residuals"

# ------------------------------------------------------

DICTIONARY_FILE = DICTIONARIES_DIR / "periodic_6x6.dict"
BENCH_FILE = REPORTS_DIR / "bench_shapes.csv"

# ---------- MESH ----------
DEFAULT_BUFFER_DEPTH = 4                                                    # flits per input buffer
DEFAULT_PACKET_LENGTH = 8                                                   # flits per packet
DEFAULT_QUANTUM_CYCLES = 1000                                               # cycles per monitoring quantum
DEFAULT_DEADLOCK_WINDOW = 500                                               # cycles without any flit movement
LIVELOCK_FACTOR = 10                                                        # L = factor * (width + height) * quantum_cycles

# ---------- WORKLOAD ----------
DEFAULT_PERIOD = 8                                                          # quanta per periodic-app cycle
DEFAULT_RAMP = 2
DEFAULT_BURST = 2

# ---------- IDS ----------
DEFAULT_WINDOW = 32                                                         # quanta per window
DEFAULT_STRIDE = 8
DEFAULT_K = 8
DEFAULT_METRIC = "euclidean"
DEFAULT_ALGORITHM = "kmeans"
DEFAULT_PERCENTILE = 99.5
DEFAULT_FLOOR = 1e-9
DEFAULT_KL_EPSILON = 1e-9
DEFAULT_MAX_ITER = 100
DEFAULT_N_INIT = 8
DEFAULT_HIST_BINS = 16

# ---------- ENVIRONMENT ----------
SEED_ENV_VAR = "NOC_SENTINEL_SEED"                                          # overrides [mesh] seed when set
LOG_LEVEL_ENV_VAR = "NOC_SENTINEL_LOG_LEVEL"

# Distance matrices can be split across processes; rows are gathered in order
# so the result does not depend on the worker count.
CPU_CORES = os.cpu_count() or 1
MAX_WORKERS = max(1, int(CPU_CORES * 0.9))
# -------------------------------

def ensure_project_dirs() -> None:
    for p in [
        TRACES_DIR,
        DICTIONARIES_DIR,

        REPORTS_DIR,
        RESIDUALS_DIR,
    ]:
        p.mkdir(parents=True, exist_ok=True)


REPORT_FIELDS = [
    "x",
    "y",
    "window_start",
    "cluster",
    "delta",
    "threshold",
    "anomalous",
    ]

TRACE_FIELDS = ["quantum", "x", "y", "port", "dir", "count"]
LABEL_FIELDS = ["quantum", "x", "y", "attacked"]
RESIDUAL_FIELDS = ["quantum_offset", "x_value", "x_prime_value", "residual"]
