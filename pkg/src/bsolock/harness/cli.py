"""``bso-lock <subcommand> --config PATH [--seed N] [--out DIR] [--set key=value ...]``"""
from __future__ import annotations

import argparse
import sys

from .commands import COMMANDS, run_command
from .config import ConfigError, parse_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bso-lock", description=__doc__)
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config or a previous run manifest")
    parser.add_argument("--seed", type=int, help="64-bit master seed")
    parser.add_argument("--out", default=".", help="output directory (default: .)")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="dotted override, e.g. teleport.sigma=0.025 (repeatable)",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = parse_config(args.config, args.overrides, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run_command(args.subcommand, cfg, args.out)
    except Exception as exc:  # any module failure is a runtime error
        print(f"{args.subcommand} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for name in manifest["outputs"]:
        print(name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
