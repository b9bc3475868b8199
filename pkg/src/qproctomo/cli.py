"""Command-line entry point.

Subcommands: ``simulate`` (run a config), ``plateau`` (same, with plateau
spread recording forced on), ``channel-info`` (diagnostics for the config's
channel), ``validate`` (quick invariant suite), ``emit-data`` (rebuild
summaries from stored trajectories).

Exit codes: 0 success, 1 usage error, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="qproctomo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="experiment INI file")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--runs", type=int, default=None, help="override n_runs")
        p.add_argument("--noiseless", action="store_true", help="force noiseless data")
        p.add_argument("--workers", type=int, default=None, help="worker processes")

    add_common(sub.add_parser("simulate", help="run the configured experiment"))
    p_pl = sub.add_parser("plateau", help="run with plateau-spread analysis recorded")
    add_common(p_pl)
    p_pl.add_argument("--samples", type=int, default=200, help="ML samples per plateau estimate")
    p_ci = sub.add_parser("channel-info", help="report rank/entropy/spectrum of the channel")
    p_ci.add_argument("--config", required=True)
    p_va = sub.add_parser("validate", help="run the built-in invariant suite")
    p_va.add_argument("--seed", type=int, default=0)
    p_em = sub.add_parser("emit-data", help="re-export summaries from stored results")
    p_em.add_argument("--results", required=True, help="directory with *_trajectory.csv")
    p_em.add_argument("--out", default=None)
    return parser


def _overrides(args) -> dict:
    ov = {}
    if args.seed is not None:
        ov["master_seed"] = args.seed
    if args.runs is not None:
        ov["n_runs"] = args.runs
    if args.noiseless:
        ov["n_copies"] = "noiseless"
    if args.workers is not None:
        ov["workers"] = args.workers
    return ov


def _run_validate(seed: int) -> int:
    from . import validate

    failures = validate.run_suite(seed=seed, emit=print)
    return 0 if failures == 0 else 3


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    from .harness import ConfigError, channel_report, load_config, reexport, run_experiment

    try:
        if args.command == "simulate":
            cfg = load_config(args.config, _overrides(args))
            result = run_experiment(cfg, out_dir=args.out)
            for kind, path in result["paths"].items():
                print(f"{kind}: {path}")
            return 0
        if args.command == "plateau":
            ov = _overrides(args)
            ov["delta_samples"] = args.samples
            cfg = load_config(args.config, ov)
            result = run_experiment(cfg, out_dir=args.out)
            for kind, path in result["paths"].items():
                print(f"{kind}: {path}")
            return 0
        if args.command == "channel-info":
            cfg = load_config(args.config)
            print(json.dumps(channel_report(cfg), indent=2))
            return 0
        if args.command == "validate":
            return _run_validate(args.seed)
        if args.command == "emit-data":
            written = reexport(args.results, args.out)
            for name, path in written.items():
                print(f"{name}: {path}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 1


if __name__ == "__main__":
    sys.exit(main())
