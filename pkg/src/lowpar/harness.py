"""Experiment runners, deterministic seeding, and CSV emission.

Trials are dispatched to a process pool; each trial derives its own
64-bit seed from the master seed with a SplitMix64 mix, so results are
independent of the worker count, and rows are sorted by
(trial, iteration, antenna) before emission so output bytes are
reproducible. Floats are written with 17 significant digits and
round-trip exactly.
"""

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .apm import ApmConfig, apm_solve
from .metrics import ccdf_percentile
from .ofdm import OfdmScenario, draw_symbols, generate_channel, jpp_apm_precode
from .linalg import RankDeficiencyError
from .projections import AffineSystem

RNG_ALGORITHM = "philox4x64"
SEED_MIX = "splitmix64"
PERCENTILE_TARGET = 0.99
TRAJECTORY_HEADER = ("experiment", "trial", "iter", "antenna",
                     "par_db", "pinc_db", "evm_resid", "oob_resid")
CCDF_HEADER = ("iter", "metric", "value_db")
PERCENTILES_HEADER = ("iter", "metric", "percentile", "value_db")

_MASK64 = (1 << 64) - 1
_GOLDEN64 = 0x9E3779B97F4A7C15


def mix_seed(master, index):
    """Derive a 64-bit stream seed from (master seed, stream index).

    SplitMix64: advance the master by (index + 1) golden-ratio steps,
    then apply the two xor-shift-multiply finalization rounds. The same
    inputs always give the same seed on every platform.
    """
    z = (int(master) + (int(index) + 1) * _GOLDEN64) & _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def make_rng(seed):
    """Counter-based generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed))


def crandn(rng, shape):
    """Circularly-symmetric complex standard normal draws."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) \
        * math.sqrt(0.5)


@dataclass(frozen=True)
class ResultRow:
    """One trajectory CSV row.

    PAR rows carry a nonnegative antenna index and par_db; frame-level
    rows carry antenna = -1 with pinc_db and the error residuals. Fields
    that do not apply are None and serialize to empty cells.
    """

    experiment: str
    trial: int
    iteration: int
    antenna: int
    par_db: float | None = None
    pinc_db: float | None = None
    evm_resid: float | None = None
    oob_resid: float | None = None

    def sort_key(self):
        return (self.trial, self.iteration, self.antenna)


def _fmt(value):
    if value is None:
        return ""
    return f"{value:.16e}"


def emit_csv(rows, path):
    """Write trajectory rows sorted by (trial, iteration, antenna)."""
    ordered = sorted(rows, key=ResultRow.sort_key)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TRAJECTORY_HEADER) + "\n")
        for r in ordered:
            fh.write(",".join((
                r.experiment, str(r.trial), str(r.iteration), str(r.antenna),
                _fmt(r.par_db), _fmt(r.pinc_db),
                _fmt(r.evm_resid), _fmt(r.oob_resid),
            )) + "\n")


def read_result_rows(path):
    """Parse a trajectory CSV back into ResultRow objects."""
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRAJECTORY_HEADER:
            raise ValueError(f"unexpected trajectory header {header}")
        for rec in reader:
            rows.append(ResultRow(
                experiment=rec[0], trial=int(rec[1]), iteration=int(rec[2]),
                antenna=int(rec[3]),
                par_db=float(rec[4]) if rec[4] else None,
                pinc_db=float(rec[5]) if rec[5] else None,
                evm_resid=float(rec[6]) if rec[6] else None,
                oob_resid=float(rec[7]) if rec[7] else None,
            ))
    return rows


def emit_ccdf_csv(ccdf_rows, path):
    """Write (iteration, metric, value_db) sample rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(CCDF_HEADER) + "\n")
        for iteration, metric, value in ccdf_rows:
            fh.write(f"{iteration},{metric},{_fmt(value)}\n")


def emit_percentiles_csv(percentile_rows, path):
    """Write (iteration, metric, percentile, value_db) summary rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(PERCENTILES_HEADER) + "\n")
        for iteration, metric, target, value in percentile_rows:
            fh.write(f"{iteration},{metric},{target:g},{_fmt(value)}\n")


def write_manifest(path, entries):
    """Write a flat key=value manifest (insertion order preserved)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={value}\n")


@dataclass(frozen=True)
class GaussianDemoConfig:
    """Dense random-system demo parameters."""

    rows: int = 100
    cols: int = 200
    rho_db: float = 0.4
    xi_db: float = 1.6
    iters: int = 500
    trials: int = 1
    seed: int = 1

    def __post_init__(self):
        if self.rows < 1 or self.cols <= self.rows:
            raise ValueError("need 1 <= rows < cols for an underdetermined system")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


def run_gaussian_demo(config):
    """Run the dense random-system demo.

    Each trial draws one complex standard normal system (A, y), runs the
    alternating-projections solver, and records the full trajectory. The
    evm_resid column of the frame rows holds the relative equality
    residual of the iterate.

    Returns:
        (rows, manifest, traces)
    """
    rows = []
    traces = []
    for trial in range(config.trials):
        rng = make_rng(mix_seed(config.seed, trial))
        a = crandn(rng, (config.rows, config.cols))
        y = crandn(rng, (config.rows,))
        system = AffineSystem.from_matrix(a, y)
        _, trace = apm_solve(system, ApmConfig(
            rho_db=config.rho_db, xi_db=config.xi_db, k_max=config.iters))
        traces.append(trace)
        for p in trace.points:
            rows.append(ResultRow("gaussian-demo", trial, p.iteration, 0,
                                  par_db=p.par_db))
            rows.append(ResultRow("gaussian-demo", trial, p.iteration, -1,
                                  pinc_db=p.pinc_db, evm_resid=p.residual))
    rows.sort(key=ResultRow.sort_key)

    manifest = {
        "artifact": f"lowpar {__version__}",
        "experiment": "gaussian-demo",
        "timestamp_unix": f"{time.time():.0f}",
        "rng": RNG_ALGORITHM,
        "seed_mix": SEED_MIX,
        "master_seed": config.seed,
        "trials": config.trials,
        "rows": config.rows,
        "cols": config.cols,
        "rho_db": config.rho_db,
        "xi_db": config.xi_db,
        "iters": config.iters,
    }
    for trial in range(config.trials):
        manifest[f"trial_seed_{trial}"] = mix_seed(config.seed, trial)
    return rows, manifest, traces


def _ofdm_trial(args):
    """Run one OFDM trial (top level so the process pool can pickle it).

    Redraws the channel when a per-tone Gram factorization is numerically
    rank deficient, counting the redraws.
    """
    scenario, trial_seed = args
    rng = make_rng(trial_seed)
    redraws = 0
    while True:
        channel = generate_channel(scenario, rng)
        symbols = draw_symbols(scenario, rng)
        try:
            _, trace = jpp_apm_precode(channel, symbols, scenario)
        except RankDeficiencyError:
            redraws += 1
            if redraws > 16:
                raise
            continue
        return trace, redraws


@dataclass
class OfdmRunResult:
    """Everything one OFDM experiment produces."""

    rows: list
    ccdf_rows: list
    percentile_rows: list
    manifest: dict
    redraws: int = 0
    traces: list = field(default_factory=list)


def run_ofdm_experiment(scenario, workers=1, ccdf_iteration=None):
    """Run the downlink experiment over independent channel trials.

    Emits per-antenna PAR rows and frame-level PINC/error rows for every
    trial and iteration, pooled 99th-percentile summaries per iteration,
    and raw CCDF samples at one chosen iteration (default: iteration 5,
    clamped to k_max). Output is identical for any worker count.
    """
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if ccdf_iteration is None:
        ccdf_iteration = min(5, scenario.k_max)
    if not 1 <= ccdf_iteration <= scenario.k_max:
        raise ValueError("ccdf_iteration must lie in [1, k_max]")

    seeds = [mix_seed(scenario.seed, t) for t in range(scenario.trials)]
    args = [(scenario, s) for s in seeds]
    if workers == 1:
        outcomes = [_ofdm_trial(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_ofdm_trial, args))

    rows = []
    redraws = 0
    traces = []
    for trial, (trace, trial_redraws) in enumerate(outcomes):
        redraws += trial_redraws
        traces.append(trace)
        for stats in trace.iterations:
            for antenna in range(scenario.bs_antennas):
                rows.append(ResultRow("ofdm-sim", trial, stats.iteration,
                                      antenna,
                                      par_db=float(stats.par_db[antenna])))
            rows.append(ResultRow("ofdm-sim", trial, stats.iteration, -1,
                                  pinc_db=stats.pinc_db,
                                  evm_resid=stats.evm_residual,
                                  oob_resid=stats.oob_residual))
    rows.sort(key=ResultRow.sort_key)

    percentile_rows = []
    ccdf_rows = []
    for k in range(1, scenario.k_max + 1):
        par_pool = np.concatenate(
            [t.iterations[k - 1].par_db for t in traces])
        pinc_pool = np.array([t.iterations[k - 1].pinc_db for t in traces])
        percentile_rows.append(
            (k, "par", PERCENTILE_TARGET,
             ccdf_percentile(par_pool, PERCENTILE_TARGET)))
        percentile_rows.append(
            (k, "pinc", PERCENTILE_TARGET,
             ccdf_percentile(pinc_pool, PERCENTILE_TARGET)))
        if k == ccdf_iteration:
            for value in np.sort(par_pool):
                ccdf_rows.append((k, "par", float(value)))
            for value in np.sort(pinc_pool):
                ccdf_rows.append((k, "pinc", float(value)))

    manifest = {
        "artifact": f"lowpar {__version__}",
        "experiment": "ofdm-sim",
        "timestamp_unix": f"{time.time():.0f}",
        "rng": RNG_ALGORITHM,
        "seed_mix": SEED_MIX,
        "master_seed": scenario.seed,
        "trials": scenario.trials,
        "bs_antennas": scenario.bs_antennas,
        "users": scenario.users,
        "subcarriers": scenario.subcarriers,
        "taps": scenario.taps,
        "k_max": scenario.k_max,
        "rho_db": scenario.rho_db,
        "xi_db": scenario.xi_db,
        "used_tones": int(scenario.used_mask.sum()),
        "mask_dc_null": bool(not scenario.used_mask[0]),
        "ccdf_iteration": ccdf_iteration,
        "rank_deficiency_redraws": redraws,
    }
    for trial, seed in enumerate(seeds):
        manifest[f"trial_seed_{trial}"] = seed
    return OfdmRunResult(rows=rows, ccdf_rows=ccdf_rows,
                         percentile_rows=percentile_rows, manifest=manifest,
                         redraws=redraws, traces=traces)
