"""Command-line entry point: ``python -m aruba {run,validate,suite}``.

Exit codes: 0 success, 1 run failure (or failed criterion), 2 config error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_RUN_FAILURE,
    ConfigError,
    parse_config,
    run_experiment,
)


def _load(path):
    try:
        with open(path, "rb") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc.strerror}"])


def _emit(args, payload, text):
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    elif not args.quiet:
        print(text)


def cmd_validate(args):
    try:
        config = _load(args.config)
    except ConfigError as exc:
        _emit(args, {"valid": False, "errors": exc.errors},
              "\n".join(f"error: {e}" for e in exc.errors))
        return EXIT_CONFIG_ERROR
    n = len(config.seeds) * config.repetitions
    _emit(args, {"valid": True, "experiment": config.experiment, "runs": n},
          f"ok: {config.experiment} experiment, {n} run(s)")
    return EXIT_OK


def cmd_run(args):
    try:
        config = _load(args.config)
    except ConfigError as exc:
        _emit(args, {"status": "config-error", "errors": exc.errors},
              "\n".join(f"error: {e}" for e in exc.errors))
        return EXIT_CONFIG_ERROR
    if args.seed is not None:
        config.seeds = [args.seed]
    if args.jobs < 1:
        _emit(args, {"status": "config-error", "errors": ["--jobs must be >= 1"]},
              "error: --jobs must be >= 1")
        return EXIT_CONFIG_ERROR
    out = args.out if args.out is not None else config.output
    if out is None:
        out = config.id
    outcome = run_experiment(config, out=out, jobs=args.jobs)
    lines = [f"wrote {outcome.csv_path} and {outcome.json_path}"]
    lines += [f"error: {e}" for e in outcome.summary["errors"]]
    _emit(args, {"status": outcome.summary["status"], "csv": outcome.csv_path,
                 "json": outcome.json_path, "errors": outcome.summary["errors"]},
          "\n".join(lines))
    return outcome.status


def cmd_suite(args):
    from .acceptance import run_suite

    only = None
    if args.only:
        try:
            only = {int(x) for x in args.only.split(",")}
        except ValueError:
            _emit(args, {"status": "config-error", "errors": ["--only takes numbers"]},
                  "error: --only takes comma-separated criterion numbers")
            return EXIT_CONFIG_ERROR

    def report(res):
        if not args.quiet and not args.json:
            print(res.line(), flush=True)

    results = run_suite(only, report)
    passed = sum(r.passed for r in results)
    if args.json:
        print(json.dumps({"passed": passed, "total": len(results), "criteria": [
            {"number": r.number, "name": r.name, "passed": r.passed, "detail": r.detail,
             "seconds": round(r.seconds, 3)} for r in results]}, indent=2))
    elif not args.quiet:
        print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_RUN_FAILURE


def build_parser():
    parser = argparse.ArgumentParser(prog="aruba", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", help="print nothing")
    common.add_argument("--json", action="store_true", help="print a JSON report")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output path prefix for .csv and .json")
    p.add_argument("--seed", type=int, help="run this single seed instead of the config's list")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", parents=[common], help="check a config without running it")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("suite", parents=[common], help="run the acceptance criteria")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG_ERROR if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
