"""Command line interface.

Verbs:
  run        execute one configured simulation
  sweep      execute a stiffness or truncation sweep
  scenarios  list the bundled scenario presets
  check      validate a config and its initial data without running

Exit codes: 0 success, 2 invalid config or initial data, 3 solver
failure, 4 output I/O failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings

from .config import parse_config_file
from .domain import validate_initial
from .errors import (
    BarrierViolation,
    IoError,
    JamflowError,
    ParameterError,
    ParseError,
    SpecError,
    UnknownScenario,
    ValidationError,
)
from .runner import run_once, run_sweep, build_problem
from .scenarios import scenario_descriptions

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="jamflow",
        description="Finite-volume solver for flow against a maximal-density barrier.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_config_args(p):
        p.add_argument("config", help="path to an INI config file")
        p.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override a config entry (repeatable)",
        )
        p.add_argument("--out", default=None, help="output directory (overrides config)")

    p_run = sub.add_parser("run", help="run one simulation")
    add_config_args(p_run)
    p_run.add_argument(
        "--quiet", action="store_true", help="suppress the progress summary"
    )

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    add_config_args(p_sweep)
    p_sweep.add_argument(
        "--quiet", action="store_true", help="suppress the per-member summary"
    )

    p_scen = sub.add_parser("scenarios", help="list bundled scenarios")

    p_check = sub.add_parser("check", help="validate config and initial data")
    p_check.add_argument("config", help="path to an INI config file")
    p_check.add_argument(
        "--override", action="append", default=[], metavar="SECTION.KEY=VALUE"
    )
    return parser


def _load(path, overrides):
    return parse_config_file(path, overrides=tuple(overrides))


def cmd_run(args):
    cfg = _load(args.config, args.override)
    result = run_once(cfg, out_dir=args.out, keep_states=False)
    if not args.quiet:
        if result.records:
            last = result.records[-1]
            print(
                f"{cfg.scenario_name}: status={result.status}"
                f" t={last.t:.6g} max_ratio={last.max_ratio:.6g}"
                f" mass={last.mass:.6g} wall={result.wall_time:.2f}s"
            )
        else:
            print(f"{cfg.scenario_name}: status={result.status} ({result.error})")
        if result.out_dir is not None:
            print(f"artifacts in {result.out_dir}")
    if result.status != "ok" and result.error:
        print(result.error, file=sys.stderr)
    return result.exit_code


def cmd_sweep(args):
    cfg = _load(args.config, args.override)
    outcome = run_sweep(cfg, out_dir=args.out)
    if not args.quiet:
        for row in outcome.rows:
            print(
                f"{row.label}: status={row.status}"
                f" peak_ratio={row.peak_max_ratio:.6g}"
                f" int_complementarity={row.int_complementarity:.6g}"
            )
        print(f"artifacts in {outcome.out_dir}")
    return outcome.exit_code


def cmd_scenarios(_args):
    for name, desc in scenario_descriptions().items():
        print(f"{name}: {desc}")
    return EXIT_OK


def cmd_check(args):
    cfg = _load(args.config, args.override)
    try:
        barrier, data, _, _ = build_problem(cfg)
    except (SpecError, ParameterError, BarrierViolation) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = validate_initial(data, barrier)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_INVALID


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": cmd_run,
        "sweep": cmd_sweep,
        "scenarios": cmd_scenarios,
        "check": cmd_check,
    }
    try:
        return handlers[args.verb](args)
    except (ValidationError, ParseError, UnknownScenario, SpecError, ParameterError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except IoError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except JamflowError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def _print_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def entry():
    # each distinct warning once, one line, no source-location noise
    warnings.simplefilter("once")
    warnings.showwarning = _print_warning
    sys.exit(main())


if __name__ == "__main__":
    entry()
