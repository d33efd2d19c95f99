"""Command line entry point.

    nrmhd run <config> [--output-dir DIR] [--jobs N]
    nrmhd sweep <config> [--output-dir DIR] [--jobs N]
    nrmhd check
    nrmhd fit <ledger.csv> --quantity NAME --window A,B

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure
(NonFinite or StepRejected), 1 failed invariant check. ``NRMHD_OUTPUT_DIR``
overrides the configured output directory; ``--output-dir`` overrides both.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from nrmhd import diagnostics as diag
from nrmhd.checks import run_checks
from nrmhd.config import RunMode, load_config
from nrmhd.errors import ConfigError, InsufficientData, NonPositiveValues
from nrmhd.harness import COMPLETED, emit_report, run

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

OUTPUT_ENV = "NRMHD_OUTPUT_DIR"

log = logging.getLogger("nrmhd")


def _output_dir(args, config) -> Path:
    return Path(args.output_dir or os.environ.get(OUTPUT_ENV) or config.output_dir)


def _summary(report) -> dict:
    out = {
        "status": report.status,
        "steps": report.steps,
        "final_time": report.final_time,
        "wall_clock": round(report.wall_clock, 3),
        "residuals": report.residuals,
        "final_energies": report.final_energies,
    }
    if report.failure_message:
        out["failure"] = {"time": report.failure_time, "message": report.failure_message}
    for key in ("comparison", "E_total_increasing_in_epsilon", "linearized", "convergence"):
        if key in report.extras:
            out[key] = report.extras[key]
    return out


def _cmd_run(args, force_sweep: bool = False) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if force_sweep and config.mode is not RunMode.SWEEP:
        if not config.epsilons:
            print("config error: run.epsilons: sweep needs a nonempty list", file=sys.stderr)
            return EXIT_VALIDATION
        config = dataclasses.replace(config, mode=RunMode.SWEEP)
    out = _output_dir(args, config)
    log.info("running %s mode into %s", config.mode.value, out)
    report = run(config, jobs=args.jobs)
    emit_report(report, out)
    print(json.dumps(_summary(report), indent=2))
    return EXIT_OK if report.status == COMPLETED else EXIT_NUMERICAL


def _cmd_check(args) -> int:
    results = run_checks()
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_CHECK_FAILED


def _cmd_fit(args) -> int:
    try:
        lo, hi = (float(v) for v in args.window.split(","))
    except ValueError:
        print(f"bad --window {args.window!r}; expected A,B", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        columns = diag.read_ledger_csv(Path(args.ledger).read_text())
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot read ledger: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.quantity not in columns or args.quantity == "t":
        print(f"unknown quantity {args.quantity!r}; columns: {', '.join(columns)}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        fit = diag.fit_power_law(columns["t"], columns[args.quantity], args.quantity, (lo, hi))
    except (InsufficientData, NonPositiveValues) as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(json.dumps(dataclasses.asdict(fit), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nrmhd", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("run", "sweep"):
        p = sub.add_parser(name, help=f"{name} a configuration file")
        p.add_argument("config")
        p.add_argument("--output-dir", default=None)
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep members")

    sub.add_parser("check", help="run the built-in invariant battery")

    p = sub.add_parser("fit", help="fit a power law to a ledger column")
    p.add_argument("ledger")
    p.add_argument("--quantity", required=True)
    p.add_argument("--window", required=True, help="t_lo,t_hi")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "sweep":
        return _cmd_run(args, force_sweep=True)
    if args.command == "check":
        return _cmd_check(args)
    return _cmd_fit(args)


if __name__ == "__main__":
    sys.exit(main())
