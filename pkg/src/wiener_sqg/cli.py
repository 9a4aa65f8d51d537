"""``wiener-sqg run <config>... [--out DIR] [--sweep]``"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import ConfigError
from .experiments import load_config, run_experiment


def _run_one(config_path: str, out_dir: str) -> int:
    try:
        spec = load_config(config_path)
    except (ConfigError, OSError) as exc:
        print(f"error: {config_path}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return run_experiment(spec, out_dir).exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wiener-sqg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run experiments from flat key = value configs")
    run.add_argument("configs", nargs="+", metavar="config-path")
    run.add_argument("--out", default=None,
                     help="output directory (default: $SQG_OUT or ./sqg_out)")
    run.add_argument("--sweep", action="store_true",
                     help="run the configs concurrently, one subdirectory each")
    run.add_argument("--workers", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out or os.environ.get("SQG_OUT") or "sqg_out")
    configs = args.configs
    if len(configs) == 1 and not args.sweep:
        return _run_one(configs[0], str(out))
    # one subdirectory per config, named after the file stem
    dirs = [str(out / Path(c).stem) for c in configs]
    if len(set(dirs)) != len(dirs):
        print("error: config file names must be distinct in a sweep", file=sys.stderr)
        return 2
    if args.sweep:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            codes = list(pool.map(_run_one, configs, dirs))
    else:
        codes = [_run_one(c, d) for c, d in zip(configs, dirs)]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
