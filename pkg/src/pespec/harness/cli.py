"""Command-line front end: ``pespec run | list | validate``."""

from __future__ import annotations

import argparse
import logging
import sys

from ..evolution import SolverFailure
from ..extension import RankDeficiencyError
from .config import ConfigError, load_config
from .registry import list_problems

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

log = logging.getLogger("pespec")


def _parser():
    p = argparse.ArgumentParser(prog="pespec", description="Projection-extension benchmark runner.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="path to a JSON experiment config")
    run.add_argument("--jobs", type=int, default=1, help="maximum parallel sweep points (default 1)")
    run.add_argument("--output", default=None, help="output directory (overrides the config)")
    run.add_argument("--paper-scale", action="store_true", help="use full-resolution defaults where available")
    sub.add_parser("list", help="list registered problems")
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    val.add_argument("--paper-scale", action="store_true")
    return p


def _print_report(report):
    for row in report.rows:
        print(f"Ne={row[0]:>4d}  Linf={row[1]:.3e}  L2={row[2]:.3e}  {row[3]:.2f}s")
    for norm, fit in report.fits().items():
        if fit is None:
            print(f"{norm}: fit omitted (fewer than 3 pre-plateau points)")
        else:
            print(f"{norm}: a={fit['a']:.4f}  R2={fit['r2']:.4f}  window Ne={fit['window']}")


def main(argv=None):
    """Entry point; returns the process exit code."""
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    if args.command == "list":
        for key, desc in list_problems():
            print(f"{key:<22s} {desc}")
        return EXIT_OK
    try:
        cfg = load_config(args.config, args.paper_scale)
        if args.command == "validate":
            print(f"ok: {cfg.problem}")
            return EXIT_OK
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from .runner import run_experiment

    try:
        paths, result = run_experiment(cfg, args.output, args.jobs, args.paper_scale)
    except (SolverFailure, RankDeficiencyError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if hasattr(result, "rows"):
        _print_report(result)
    for path in paths:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
