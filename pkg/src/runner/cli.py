"""Command-line entry point.

    python -m src.runner.cli fixedpoint --config configs/fixedpoint.json
    python -m src.runner.cli suite --config configs/suite.json --out runs/all

Exit status: 0 when every embedded check passes, 1 when a check fails or the
run raised (the manifest is still written), 2 for an invalid config.
"""

import argparse
import logging
import sys
from pathlib import Path

from src.enums import Subcommand
from src.errors import ConfigError
from src.models import RunConfig
from src.persistence import (
    OUTPUT_ROOT_ENV,
    load_config,
    override_seed,
    resolve_output_dir,
)
from src.runner.execute import run_experiment

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fplab", description="Fixed-point experiments on small dense networks."
    )
    parser.add_argument(
        "subcommand",
        choices=[s.value for s in Subcommand],
        help="Experiment to run.",
    )
    parser.add_argument(
        "--config",
        type=Path,
        default=None,
        help="JSON run config (default: every block at its defaults).",
    )
    parser.add_argument("--seed", type=int, default=None, help="Override the seed.")
    parser.add_argument(
        "--out",
        type=Path,
        default=None,
        help=f"Output directory (default: ${OUTPUT_ROOT_ENV}/<experiment>).",
    )
    parser.add_argument(
        "--quiet", action="store_true", help="Only log warnings and errors."
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.quiet:
        logging.getLogger().setLevel(logging.WARNING)

    try:
        config = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            config = override_seed(config, args.seed)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    subcommand = Subcommand(args.subcommand)
    out_dir = resolve_output_dir(config, args.out)
    config_dir = args.config.parent if args.config else Path.cwd()
    manifest = run_experiment(subcommand, config, out_dir, config_dir)

    for check in manifest.checks:
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.name}  {check.detail}")
    if manifest.error:
        print(f"error: {manifest.error}", file=sys.stderr)
    print(f"{subcommand}: {'passed' if manifest.passed else 'failed'} -> {out_dir}")
    return 0 if manifest.passed else 1


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    raise SystemExit(main())
