"""Command-line entry point ``dfrc``.

Exit codes: 0 success, 1 configuration error, 2 more than 1% of sweep
rows flagged as solver failures.
"""
import argparse
import logging
import os
import sys

import numpy as np

from . import experiments as ex
from .beampattern import write_matrix
from .errors import ConfigError, DfrcError
from .single_user import solve_single_user

log = logging.getLogger("dfrc")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="dfrc", description=(
        "Beamforming for MIMO dual-function radar-communication downlinks "
        "under a prescribed transmit covariance."))
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="experiment TOML file")
        sp.add_argument("--seed", type=int, help="override seed_base")
        sp.add_argument("--out", help="override output_dir")
        sp.add_argument("--threads", type=int, help="worker threads")
        sp.add_argument("--no-figures", action="store_true", help="write CSV files only")
        return sp

    common(sub.add_parser("design-covariance", help="synthesize R_des and its beampattern report"))
    common(sub.add_parser("sweep", help="Monte-Carlo SNR sweep over the configured schemes"))
    t = common(sub.add_parser("trace", help="per-iteration convergence CSV for one trial"))
    t.add_argument("--snr", type=float, help="SNR in dB (default: first grid point)")
    t.add_argument("--trial", type=int, default=0)
    t.add_argument("--schemes", nargs="+", help="subset of bcd, manopt, mmse_filter")
    s = common(sub.add_parser("single-user", help="closed-form single-user solve with diagnostics"))
    s.add_argument("--snr", type=float, help="SNR in dB (default: first grid point)")
    return p


def _load(args):
    cfg = ex.load_config(args.config)
    if args.seed is not None and args.seed < 0:
        raise ConfigError("--seed must be non-negative")
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return ex.override(cfg, seed_base=args.seed, output_dir=args.out, threads=args.threads)


def _figure(args, fn, *a):
    if args.no_figures:
        return None
    from . import plotting
    return getattr(plotting, fn)(*a)


def cmd_design(args, cfg):
    if isinstance(cfg.beampattern, str):
        raise ConfigError("design-covariance needs a [beampattern] spec, not r_des_file")
    os.makedirs(cfg.output_dir, exist_ok=True)
    spec = ex.build_covariance_spec(cfg)
    r_path = os.path.join(cfg.output_dir, "R_des.txt")
    write_matrix(r_path, spec.R_des)
    csv_path = os.path.join(cfg.output_dir, "beampattern.csv")
    rows = ex.emit_beampattern_report(cfg.beampattern, spec.R_des, csv_path)
    _figure(args, "plot_beampattern", rows, os.path.join(cfg.output_dir, "beampattern.png"))
    peaks = ex.pattern_peaks(rows[:, 0], rows[:, 2])
    print(f"R_des: {r_path} (ridge {spec.ridge:.3e})")
    print(f"beampattern: {csv_path}")
    print("local maxima (deg): " + " ".join(f"{p:g}" for p in peaks))
    return EXIT_OK


def cmd_sweep(args, cfg):
    result = ex.run_sweep(cfg)
    paths = ex.write_sweep(result, cfg.output_dir)
    _figure(args, "plot_sweep", result.aggregates, os.path.join(cfg.output_dir, "sweep.png"))
    for a in result.aggregates:
        print(f"{a.scheme:>24s}  {a.snr_db:6.1f} dB  mean {a.mean_rate:9.4f}  "
              f"std {a.std_rate:8.4f}  n={a.trial_count}  flagged={a.flagged_count}")
    print(f"results: {paths['results']}")
    frac = result.failure_fraction
    if frac > ex.FAILURE_LIMIT:
        for r in result.rows:
            if r.flagged:
                log.error("flagged %s snr=%g trial=%d: %s", r.scheme, r.snr_db, r.trial, r.note)
        print(f"error: {100 * frac:.2f}% of rows flagged (limit {100 * ex.FAILURE_LIMIT:g}%)",
              file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_trace(args, cfg):
    rows = ex.convergence_trace(cfg, snr_db=args.snr, trial=args.trial, schemes=args.schemes)
    path = os.path.join(cfg.output_dir, "trace.csv")
    ex.write_csv(path, ex.TRACE_COLUMNS, rows, "trace")
    _figure(args, "plot_trace", rows, os.path.join(cfg.output_dir, "trace.png"))
    for scheme in dict.fromkeys(r[0] for r in rows):
        wsr = [r[2] for r in rows if r[0] == scheme]
        print(f"{scheme:>12s}: {len(wsr) - 1} iterations, final WSR {wsr[-1]:.6f}, "
              f"within 1% after {ex.iterations_to_within(wsr)}")
    print(f"trace: {path}")
    return EXIT_OK


def cmd_single_user(args, cfg):
    if cfg.system.n_users != 1:
        raise ConfigError("single-user needs n_users = 1")
    snr = cfg.snr_grid_db[0] if args.snr is None else args.snr
    sys_cfg = cfg.system.with_snr_db(snr)
    spec = ex.build_covariance_spec(cfg)
    H = ex.sample_channels(sys_cfg, cfg.seed_base)[0]
    sol = solve_single_user(H, spec, sys_cfg.noise_var, sys_cfg.streams_per_user)
    np.set_printoptions(precision=6, suppress=False)
    print(f"snr_db          {snr:g}")
    print(f"seed            {cfg.seed_base}")
    print(f"rate            {sol.rate:.12g} bit/s/Hz")
    print(f"identity_rate   {sol.identity_rate:.12g} bit/s/Hz")
    print(f"residual        {spec.residual(sol.F):.3e}")
    print(f"ridge           {spec.ridge:.3e}")
    print(f"eig(H_e)        {sol.He_eigenvalues}")
    return EXIT_OK


_COMMANDS = {"design-covariance": cmd_design, "sweep": cmd_sweep, "trace": cmd_trace,
             "single-user": cmd_single_user}


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _load(args)
        return _COMMANDS[args.command](args, cfg)
    except (ConfigError, DfrcError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
