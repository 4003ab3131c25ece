"""Command-line entry point: ``ldpfair run|validate|theta|synth``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .mechanisms import optimize_theta
from .synthetic import write_synthetic


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config, output=args.out)
    rows = harness.run_experiment(cfg, jobs=args.jobs)
    paths = harness.write_outputs(cfg, rows, cfg.output)
    print(f"{len(rows)} rows -> {paths['rows']}")
    print(f"summary -> {paths['summary']}")
    return 0


def _cmd_validate(args) -> int:
    cfg = harness.load_config(args.config)
    d = harness.validate(cfg)
    s = d.schema
    print(f"dataset {s.name}: n={d.n} (dropped {d.dropped})")
    for a in s.attributes:
        role = "target" if a.name == s.target else "protected" if a.name == s.protected else (
            "sensitive" if a.name in s.sensitive else "non-sensitive"
        )
        print(f"  {a.name:<20} k={a.k:<4} {role}")
    cells = len(cfg.mechanisms) * len(cfg.allocations) * len(cfg.epsilons)
    print(f"{cfg.runs} runs x (1 + {cells} cells) = {cfg.runs * (1 + cells)} rows")
    return 0


def _cmd_theta(args) -> int:
    print(repr(optimize_theta(args.epsilon)))
    return 0


def _cmd_synth(args) -> int:
    data, schema = write_synthetic(args.out, n=args.n, seed=args.seed)
    print(f"wrote {data} and {schema}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldpfair", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="output directory (overrides the config)")
    run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="load data and schema without training")
    val.add_argument("--config", required=True)
    val.set_defaults(func=_cmd_validate)

    theta = sub.add_parser("theta", help="print the optimised THE threshold")
    theta.add_argument("--epsilon", type=float, required=True)
    theta.set_defaults(func=_cmd_theta)

    synth = sub.add_parser("synth", help="write the bundled synthetic dataset and its schema")
    synth.add_argument("--out", required=True)
    synth.add_argument("--n", type=int, default=10_000)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
