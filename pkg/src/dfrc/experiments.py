"""Seeded Monte-Carlo harness: SNR sweeps, convergence traces, beampattern reports.

A sweep is described by a TOML file::

    trials = 100
    seed_base = 0
    snr_grid_db = [0, 10, 20, 30]
    schemes = ["bcd", "manopt", "mmse_filter", "cholesky"]
    output_dir = "out"

    [system]
    n_tx = 16
    n_rx = 4
    n_users = 4
    streams_per_user = 4
    power = 1.0

    [beampattern]            # or: r_des_file = "R_des.txt"
    target_angles = [-60, 0, 60]
    beam_width = 9.0

    [bcd]                    # optional, BcdOptions fields
    [manopt]                 # optional, ManifoldOptions fields

Unknown keys anywhere are rejected.
"""
import csv
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .baselines import cholesky_beamformer, run_mmse_filter
from .beampattern import (BeampatternSpec, design_covariance, evaluate_beampattern,
                          ideal_pattern, make_covariance_spec, read_matrix)
from .errors import ConfigError, DfrcError
from .manifold import ManifoldOptions, run_manifold_descent
from .scenario import SystemConfig, sample_channels
from .single_user import solve_single_user
from .wmmse import BcdOptions, run_bcd

SCHEMA_VERSION = 1
SCHEMES = ("bcd", "manopt", "mmse_filter", "cholesky", "single_user_closed_form")
TRACE_SCHEMES = ("bcd", "manopt", "mmse_filter")
RESIDUAL_LIMIT = 1e-8
FAILURE_LIMIT = 0.01

_TOP_KEYS = {"trials", "seed_base", "snr_grid_db", "schemes", "output_dir", "threads",
             "system", "beampattern", "bcd", "manopt"}
_SYSTEM_KEYS = {"n_tx", "n_rx", "n_users", "streams_per_user", "power", "weights"}
_BEAM_KEYS = {"target_angles", "beam_width", "grid_points", "r_des_file"}


@dataclass(frozen=True)
class SweepConfig:
    system: SystemConfig
    beampattern: object = field(default_factory=BeampatternSpec)
    snr_grid_db: tuple = (30.0,)
    schemes: tuple = ("bcd",)
    trials: int = 100
    seed_base: int = 0
    output_dir: str = "out"
    threads: int = 1
    bcd: BcdOptions = field(default_factory=BcdOptions)
    manopt: ManifoldOptions = field(default_factory=ManifoldOptions)

    def __post_init__(self):
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}")
        if not isinstance(self.seed_base, int) or self.seed_base < 0:
            raise ConfigError(f"seed_base must be a non-negative integer, got {self.seed_base!r}")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError(f"threads must be a positive integer, got {self.threads!r}")
        schemes = tuple(self.schemes)
        if not schemes:
            raise ConfigError("schemes must not be empty")
        unknown = [s for s in schemes if s not in SCHEMES]
        if unknown:
            raise ConfigError(f"unknown schemes {unknown}; choose from {list(SCHEMES)}")
        if len(set(schemes)) != len(schemes):
            raise ConfigError(f"duplicate schemes in {list(schemes)}")
        if "single_user_closed_form" in schemes and self.system.n_users != 1:
            raise ConfigError("single_user_closed_form needs n_users = 1")
        snr = tuple(float(s) for s in np.atleast_1d(self.snr_grid_db))
        if not snr or not all(math.isfinite(s) for s in snr):
            raise ConfigError("snr_grid_db must be a non-empty list of finite numbers")
        object.__setattr__(self, "schemes", schemes)
        object.__setattr__(self, "snr_grid_db", snr)


def _reject_unknown(table, allowed, where):
    extra = sorted(set(table) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) {extra} in {where}; allowed: {sorted(allowed)}")


def _options(cls, table, where):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    _reject_unknown(table, {f.name for f in fields(cls)}, f"[{where}]")
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


def config_from_dict(data, base_dir="."):
    """Build a :class:`SweepConfig` from parsed TOML."""
    _reject_unknown(data, _TOP_KEYS, "the top level")
    if "system" not in data:
        raise ConfigError("missing [system] table")
    sys_t = data["system"]
    if not isinstance(sys_t, dict):
        raise ConfigError("[system] must be a table")
    _reject_unknown(sys_t, _SYSTEM_KEYS, "[system]")
    try:
        system = SystemConfig(**sys_t)
    except TypeError as exc:
        raise ConfigError(f"[system]: {exc}") from None

    beam_t = data.get("beampattern", {})
    _reject_unknown(beam_t, _BEAM_KEYS, "[beampattern]")
    if "r_des_file" in beam_t:
        if set(beam_t) != {"r_des_file"}:
            raise ConfigError("[beampattern] r_des_file cannot be combined with other keys")
        beam = os.path.join(base_dir, beam_t["r_des_file"])
    else:
        kw = {}
        if "target_angles" in beam_t:
            kw["target_angles"] = tuple(beam_t["target_angles"])
        if "beam_width" in beam_t:
            kw["beam_width"] = float(beam_t["beam_width"])
        if "grid_points" in beam_t:
            kw["grid"] = np.linspace(-90.0, 90.0, int(beam_t["grid_points"]))
        try:
            beam = BeampatternSpec(**kw)
        except ValueError as exc:
            raise ConfigError(f"[beampattern]: {exc}") from None

    top = {k: data[k] for k in ("trials", "seed_base", "threads") if k in data}
    if "snr_grid_db" in data:
        top["snr_grid_db"] = tuple(data["snr_grid_db"])
    if "schemes" in data:
        top["schemes"] = tuple(data["schemes"])
    if "output_dir" in data:
        top["output_dir"] = os.path.join(base_dir, data["output_dir"])
    return SweepConfig(system=system, beampattern=beam,
                       bcd=_options(BcdOptions, data.get("bcd", {}), "bcd"),
                       manopt=_options(ManifoldOptions, data.get("manopt", {}), "manopt"),
                       **top)


def load_config(path):
    """Parse and validate a sweep TOML file; relative paths resolve against its directory."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


def build_covariance_spec(config):
    """Design (or load) ``R_des`` for the configured system and factor it."""
    P, n = config.system.power, config.system.n_tx
    if isinstance(config.beampattern, str):
        R = read_matrix(config.beampattern)
        if R.shape != (n, n):
            raise ConfigError(f"{config.beampattern}: R_des is {R.shape}, expected {(n, n)}")
    else:
        R = design_covariance(config.beampattern, n, P).R
    return make_covariance_spec(R, power=P)


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    scheme: str
    snr_db: float
    trial: int
    seed: int
    weighted_sum_rate: float
    iterations: int
    converged: bool
    max_residual: float
    flagged: bool
    wall_time_ms: float
    note: str = ""


@dataclass(frozen=True)
class Aggregate:
    scheme: str
    snr_db: float
    mean_rate: float
    std_rate: float
    trial_count: int
    flagged_count: int


@dataclass
class SweepResult:
    rows: list
    aggregates: list

    @property
    def failure_fraction(self):
        return sum(r.flagged for r in self.rows) / max(len(self.rows), 1)

    def mean_rate(self, scheme, snr_db):
        for a in self.aggregates:
            if a.scheme == scheme and a.snr_db == snr_db:
                return a.mean_rate
        raise KeyError((scheme, snr_db))


def _solve(scheme, channels, spec, cfg, config):
    if scheme == "bcd":
        return run_bcd(channels, spec, cfg, config.bcd)
    if scheme == "mmse_filter":
        return run_mmse_filter(channels, spec, cfg, config.bcd)
    if scheme == "manopt":
        return run_manifold_descent(channels, spec, cfg, config.manopt)
    if scheme == "cholesky":
        return cholesky_beamformer(spec, channels, cfg)
    if scheme == "single_user_closed_form":
        return solve_single_user(channels[0], spec, cfg.noise_var, cfg.streams_per_user)
    raise ConfigError(f"unknown scheme {scheme!r}")


def _audit(scheme, sol, spec):
    """Covariance residual of every recorded iterate, recomputed here."""
    if scheme == "single_user_closed_form":
        return spec.residual(sol.F), 0, True, sol.rate
    worst = max([spec.residual(sol.F)] + [r.residual for r in sol.trace])
    return worst, sol.iterations_used, sol.converged, sol.weighted_sum_rate


def _run_item(item, spec, config, channel_source):
    snr, trial = item
    cfg = config.system.with_snr_db(snr)
    seed = config.seed_base + trial
    channels = channel_source(cfg, seed)
    out = []
    for scheme in config.schemes:
        t0 = time.perf_counter()
        try:
            sol = _solve(scheme, channels, spec, cfg, config)
            ms = 1e3 * (time.perf_counter() - t0)
            res, its, conv, rate = _audit(scheme, sol, spec)
            bad = not (res < RESIDUAL_LIMIT and math.isfinite(rate))
            note = f"covariance residual {res:.3e}" if bad else ""
        except (DfrcError, np.linalg.LinAlgError, FloatingPointError) as exc:
            ms = 1e3 * (time.perf_counter() - t0)
            res, its, conv, rate, bad = float("nan"), 0, False, float("nan"), True
            note = f"{type(exc).__name__}: {exc}"
        out.append(SweepRow(scheme, snr, trial, seed, float(rate), int(its), bool(conv),
                            float(res), bad, ms, note))
    return out


def aggregate(rows):
    """Mean and sample standard deviation per (scheme, snr) over unflagged rows."""
    groups = {}
    for r in rows:
        groups.setdefault((r.scheme, r.snr_db), []).append(r)
    out = []
    for (scheme, snr), rs in sorted(groups.items(), key=lambda kv: _order_key(*kv[0])):
        good = np.array([r.weighted_sum_rate for r in rs if not r.flagged])
        n = good.size
        out.append(Aggregate(scheme, snr,
                             float(np.mean(good)) if n else float("nan"),
                             float(np.std(good, ddof=1)) if n > 1 else 0.0,
                             n, len(rs) - n))
    return out


def _order_key(scheme, snr, trial=0):
    return (SCHEMES.index(scheme), snr, trial)


def run_sweep(config, channel_source=sample_channels, threads=None):
    """Evaluate every scheme on paired channels for each (snr, trial).

    Parameters
    ----------
    config : SweepConfig
    channel_source : callable, optional
        ``(cfg, seed) -> ChannelSet``; defaults to Rayleigh draws.
    threads : int, optional
        Worker count; overrides ``config.threads``.

    Returns
    -------
    SweepResult
        Rows sorted by (scheme, snr, trial). A row is flagged when its
        solver raised or any iterate breaks the covariance constraint by
        more than ``RESIDUAL_LIMIT``; flagged rows are left out of the
        aggregates.
    """
    spec = build_covariance_spec(config)
    items = [(snr, t) for snr in config.snr_grid_db for t in range(config.trials)]
    workers = threads or config.threads
    if workers == 1:
        parts = [_run_item(it, spec, config, channel_source) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda it: _run_item(it, spec, config, channel_source), items))
    rows = sorted((r for p in parts for r in p), key=lambda r: _order_key(r.scheme, r.snr_db, r.trial))
    return SweepResult(rows=rows, aggregates=aggregate(rows))


# --------------------------------------------------------------------------
# CSV output
# --------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path, header, rows, kind):
    """``# schema_version=..`` line, a header row, then ``rows``."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# dfrc {kind} schema_version={SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def read_csv(path):
    """Rows of a CSV written by :func:`write_csv` as dicts of strings."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


RESULT_COLUMNS = ("scheme", "snr_db", "trial", "seed", "weighted_sum_rate", "iterations",
                  "converged", "max_residual", "flagged", "note")
AGGREGATE_COLUMNS = ("scheme", "snr_db", "mean_rate", "std_rate", "trial_count", "flagged_count")
TIMING_COLUMNS = ("scheme", "snr_db", "trial", "wall_time_ms")


def write_sweep(result, out_dir):
    """Write results, aggregates and timings CSVs; return their paths.

    Wall times live in their own file so the other two are a pure
    function of the configuration.
    """
    paths = {k: os.path.join(out_dir, f"{k}.csv") for k in ("results", "aggregates", "timings")}
    write_csv(paths["results"], RESULT_COLUMNS,
              [[getattr(r, c) for c in RESULT_COLUMNS] for r in result.rows], "results")
    write_csv(paths["aggregates"], AGGREGATE_COLUMNS,
              [[getattr(a, c) for c in AGGREGATE_COLUMNS] for a in result.aggregates], "aggregates")
    write_csv(paths["timings"], TIMING_COLUMNS,
              [[getattr(r, c) for c in TIMING_COLUMNS] for r in result.rows], "timings")
    return paths


# --------------------------------------------------------------------------
# convergence traces and beampattern reports
# --------------------------------------------------------------------------

TRACE_COLUMNS = ("scheme", "iteration", "wsr", "wmmse", "residual")


def convergence_trace(config, snr_db=None, trial=0, schemes=None, channel_source=sample_channels):
    """Per-iteration ``(scheme, iteration, wsr, wmmse, residual)`` rows for one trial.

    ``wmmse`` is the weighted sum-MSE objective in nats; for ``manopt``
    it is the same quantity evaluated at the MMSE receivers and weights.
    """
    schemes = tuple(schemes or [s for s in config.schemes if s in TRACE_SCHEMES] or ("bcd",))
    bad = [s for s in schemes if s not in TRACE_SCHEMES]
    if bad:
        raise ConfigError(f"trace supports {list(TRACE_SCHEMES)}, got {bad}")
    snr = config.snr_grid_db[0] if snr_db is None else float(snr_db)
    cfg = config.system.with_snr_db(snr)
    spec = build_covariance_spec(config)
    channels = channel_source(cfg, config.seed_base + trial)
    rows = []
    for scheme in schemes:
        sol = _solve(scheme, channels, spec, cfg, config)
        rows.extend((scheme, r.iteration, r.wsr, r.wmmse, r.residual) for r in sol.trace)
    return rows


def iterations_to_within(wsr_trace, frac=0.01):
    """First iteration from which every later WSR stays within ``frac`` of the last one."""
    w = np.asarray(wsr_trace, dtype=float)
    far = np.abs(w - w[-1]) > frac * abs(w[-1])
    idx = np.flatnonzero(far)
    return 0 if idx.size == 0 else int(idx[-1] + 1)


def beampattern_rows(spec, R_des):
    """``(theta, ideal, achieved)`` over the spec grid."""
    theta = spec.grid
    return np.column_stack([theta, ideal_pattern(spec, theta), evaluate_beampattern(R_des, theta)])


def emit_beampattern_report(spec, R_des, path):
    """Write the ``(theta, ideal, achieved)`` CSV to ``path`` and return the rows."""
    rows = beampattern_rows(spec, R_des)
    try:
        write_csv(path, ("theta_deg", "ideal", "achieved"), [list(map(float, r)) for r in rows],
                  "beampattern")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write beampattern report: {exc.strerror}", path) from None
    return rows


def pattern_peaks(theta, values):
    """Angles of the local maxima of a sampled pattern."""
    v = np.asarray(values)
    inner = (v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])
    return np.asarray(theta)[1:-1][inner]


def override(config, **changes):
    """Copy of ``config`` with the non-``None`` entries of ``changes`` applied."""
    return replace(config, **{k: v for k, v in changes.items() if v is not None})
