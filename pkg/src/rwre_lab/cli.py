"""Command-line entry point.

    rwre-lab <subcommand> --config <path> [--seed N] [--workers N] [--out DIR]

Subcommands mirror the experiment kinds; the config file carries everything
else.  Exit codes: 0 success, 1 invariant failure, 2 config error, 3 numeric
truncation failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, ContextError, TruncationError
from .harness import EXPERIMENTS, execute, load_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rwre-lab",
                                     description="random-environment walk laboratory")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg["experiment"] != args.experiment:
            raise ConfigError(
                f"config is for '{cfg['experiment']}' but subcommand was '{args.experiment}'")
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.workers is not None:
            cfg["workers"] = args.workers
        manifest, result = execute(cfg, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (TruncationError, ContextError) as exc:
        print(f"numeric truncation failure: {exc}", file=sys.stderr)
        return 3
    except ArithmeticError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 1

    if cfg["experiment"] == "selftest":
        failed = [r for r in result if not r.passed]
        for r in result:
            status = "PASS" if r.passed else "FAIL"
            print(f"[{status}] {r.name}: {r.detail} ({r.seconds:.1f}s)")
        if failed:
            print(f"{len(failed)} of {len(result)} checks failed", file=sys.stderr)
            return 1
    print(f"wrote manifest {manifest.config_digest} "
          f"({manifest.wall_seconds:.1f}s, outputs: {', '.join(manifest.outputs)})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
