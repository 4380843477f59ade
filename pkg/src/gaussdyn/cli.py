"""Command-line entry point ``gaussdyn``.

Exit codes: 0 success, 2 config error, 3 environment constraint
violation, 4 unphysical initial state, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import config as cfgmod
from . import runner
from .errors import (ConfigError, EnvironmentConstraintError, GaussdynError,
                     PreconditionError, UnphysicalStateError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ENVIRONMENT = 3
EXIT_UNPHYSICAL = 4
EXIT_NUMERICAL = 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _default_jobs() -> int:
    raw = os.environ.get("GAUSSDYN_JOBS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"GAUSSDYN_JOBS must be an integer, got {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gaussdyn",
                     description="Entanglement dynamics of two oscillators in a common bath.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sc = sub.add_parser("scenario", help="write a preset scenario as CSV")
    sc.add_argument("name", choices=runner.SCENARIOS)
    sc.add_argument("--set", dest="overrides", action="append", nargs="+", default=[],
                    metavar="KEY=VALUE", help="override a preset key (repeatable)")
    sc.add_argument("--out", required=True, help="output CSV path")
    sc.add_argument("--jobs", type=int, default=None)

    run = sub.add_parser("run", help="single evaluation from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--allow-unphysical", action="store_true")
    run.add_argument("--out", default=None, help="trace CSV path (overrides output.path)")

    sw = sub.add_parser("sweep", help="1-D or 2-D parameter sweep from a config file")
    sw.add_argument("--config", required=True)
    sw.add_argument("--jobs", type=int, default=None)
    sw.add_argument("--out", default=None, help="CSV path (overrides output.path)")
    return parser


def _load(path, allow_unphysical=False):
    mapping = cfgmod.load(path)
    if allow_unphysical:
        mapping["allow_unphysical"] = "true"
    return cfgmod.from_mapping(mapping)


def _dispatch(args) -> int:
    jobs = getattr(args, "jobs", None)
    if jobs is None and args.command in ("scenario", "sweep"):
        jobs = _default_jobs()
    if jobs is not None and jobs < 1:
        raise ConfigError("--jobs must be at least 1")

    if args.command == "scenario":
        items = [item for group in args.overrides for item in group]
        runner.run_scenario(args.name, cfgmod.parse_assignments(items), args.out,
                            jobs=jobs, stderr=sys.stderr)
    elif args.command == "run":
        cfg = _load(args.config, args.allow_unphysical)
        runner.run_single(cfg, sys.stdout, stderr=sys.stderr, trace_path=args.out)
    else:
        cfg = _load(args.config)
        if not cfg.sweep:
            raise ConfigError("sweep needs sweep.param in the config")
        runner.run_sweep(cfg, jobs=jobs, out=args.out, stderr=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, PreconditionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EnvironmentConstraintError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ENVIRONMENT
    except UnphysicalStateError as exc:
        print(f"rejected: {exc} (use --allow-unphysical to override)", file=sys.stderr)
        return EXIT_UNPHYSICAL
    except GaussdynError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
