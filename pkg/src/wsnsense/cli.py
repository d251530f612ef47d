"""
Command-line entry point.

Subcommands: ``simulate``, ``calibrate``, ``croc``, ``pmd-snr``, ``bound``,
``selftest``. Exit status: 0 success, 1 self-test failure, 2 configuration
error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import sys

from .errors import ConfigError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _common(sp):
    sp.add_argument("--config", help="TOML or JSON file with [scenario] / [experiment] tables")
    sp.add_argument("--preset", help="named scenario preset (e.g. desk, paper, paper-ff)")
    sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
    sp.add_argument("--trials", type=int, help="number of Monte Carlo trials")
    sp.add_argument("--threads", type=int, help="worker threads (default $WSNSENSE_THREADS or 1)")
    sp.add_argument("--out", help="output file (default: stdout)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wsnsense", description="Distributed energy-detection simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("simulate", help="dump one energy matrix (node, window, energy)")
    _common(sp)
    sp.add_argument("--hypothesis", choices=("H0", "H1"), default="H1")
    sp = sub.add_parser("calibrate", help="detector thresholds from simulated H0 runs")
    _common(sp)
    sp = sub.add_parser("croc", help="complementary ROC table")
    _common(sp)
    sp = sub.add_parser("pmd-snr", help="miss detection versus SNR at one Pfa")
    _common(sp)
    sp = sub.add_parser("bound", help="approximation-error bounds versus N")
    _common(sp)
    sp.add_argument("--samples", type=int, help="importance samples per N")
    sp = sub.add_parser("selftest", help="run the built-in numerical oracle checks")
    return ap


def _load(args):
    from .harness import load_experiment
    from .scenario import PRESETS

    if args.config:
        cfg, exp = load_experiment(args.config)
    else:
        cfg, exp = PRESETS["desk"], {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}")
        cfg = PRESETS[args.preset]
    if args.seed is not None:
        cfg = cfg.replace(master_seed=args.seed)
    return cfg, exp


def _spec(args, cfg, exp, **defaults):
    from .harness import ExperimentSpec

    kw = dict(defaults)
    for key in ("detectors", "pfa_grid", "snr_grid_db", "n_trials", "n_calib"):
        if key in exp:
            kw[key] = exp[key]
    if args.trials is not None:
        kw["n_trials"] = args.trials
    return ExperimentSpec(cfg, threads=args.threads, fmt=args.format, out=args.out, **kw)


def _write(table, args):
    from .harness import emit, render

    if args.out:
        emit(table, args.out, args.format)
    else:
        sys.stdout.write(render(table, args.format))


def cmd_simulate(args):
    from .harness import Table
    from .measurement import simulate_trial
    from .numerics import RngStream

    cfg, _ = _load(args)
    tr = simulate_trial(cfg, RngStream(cfg.master_seed, 0, (0,)), with_h1=args.hypothesis == "H1")
    e = tr.e1 if args.hypothesis == "H1" else tr.e0
    rows = [{"node": i, "window": j, "energy": float(e[i, j])}
            for i in range(e.shape[0]) for j in range(e.shape[1])]
    _write(Table(("node", "window", "energy"), rows), args)


def cmd_calibrate(args):
    from .detectors import quantile_threshold
    from .harness import PHASE_CALIBRATION, Table, h0_statistics

    cfg, exp = _load(args)
    spec = _spec(args, cfg, exp, n_trials=100)
    n = args.trials if args.trials is not None else spec.n_calib
    stats = h0_statistics(cfg, spec.detectors, n, spec.seed, PHASE_CALIBRATION, spec.threads)
    rows = [{"detector": k.value, "pfa_target": pfa, "threshold": quantile_threshold(stats[k], pfa),
             "n_calib": n, "seed": spec.seed}
            for k in spec.detectors for pfa in spec.pfa_grid]
    _write(Table(("detector", "pfa_target", "threshold", "n_calib", "seed"), rows), args)


def cmd_croc(args):
    from .harness import run_croc

    cfg, exp = _load(args)
    _write(run_croc(_spec(args, cfg, exp, n_calib=10_000)), args)


def cmd_pmd_snr(args):
    from .harness import run_pmd_vs_snr

    cfg, exp = _load(args)
    defaults = dict(n_calib=10_000, pfa_grid=(0.01,), snr_grid_db=(-21, -18, -15, -12, -9, -6, -3))
    _write(run_pmd_vs_snr(_spec(args, cfg, exp, **defaults)), args)


def cmd_bound(args):
    from .bounds import BOUND_COLUMNS, bound_vs_n_experiment
    from .harness import Table
    from .numerics import RngStream

    cfg, exp = _load(args)
    if not args.config and not args.preset:
        # default: the bound setting (M = 16, SNR = 10 dB, eps = 1/4)
        cfg = cfg.replace(window_len=16, window_time=16 / cfg.bandwidth, snr_db=10.0)
    n_values = exp.get("n_values", list(range(1, 9)))
    n_samples = args.samples or exp.get("n_samples", 100_000)
    rows = bound_vs_n_experiment(cfg, n_values, n_samples, RngStream(cfg.master_seed, 0, (3,)),
                                 fading=exp.get("bound_fading"))
    _write(Table(BOUND_COLUMNS, [r.as_dict() for r in rows]), args)


def cmd_selftest(args):
    from .selftest import run_selftest

    return EXIT_OK if run_selftest(print) else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "calibrate": cmd_calibrate, "croc": cmd_croc,
            "pmd-snr": cmd_pmd_snr, "bound": cmd_bound, "selftest": cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        status = COMMANDS[args.command](args)
    except ValueError as exc:  # includes ConfigError
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if status is None else int(status)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
