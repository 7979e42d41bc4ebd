"""stnlab command-line entry point"""

import argparse
import logging
import sys
from typing import List, Optional

from stnlab_common.logging import setup_logging
from stnlab_cli.commands import (
    cmd_align,
    cmd_compare,
    cmd_eval,
    cmd_sweep,
    cmd_train,
    run_command,
)

logger = logging.getLogger(__name__)

COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "align": cmd_align,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
}


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value run configuration file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--checkpoint", help="model checkpoint to load")
    parser.add_argument("--data", help="directory with the MNIST IDX files (default: STNLAB_DATA)")
    parser.add_argument("--seed", type=int, default=None, help="run seed")
    parser.add_argument("--workers", type=int, default=None, help="worker threads (default: STNLAB_WORKERS)")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stnlab", description="Spatial transformer experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("train", help="train one model from a run configuration"))
    _common(sub.add_parser("eval", help="classification error of a checkpoint"))

    align = sub.add_parser("align", help="image / feature-map alignment analysis")
    _common(align)
    align.add_argument("--layer", type=int, default=1, help="conv block whose output is compared")
    align.add_argument("--rotation", type=float, default=None, help="rotation in degrees (default 180)")
    align.add_argument("--shift", default=None, help="integer content shift DY,DX instead of a rotation")
    align.add_argument("--glyphs", type=int, default=0, help="analyse the W/M detector on this many glyphs")
    align.add_argument("--size", type=int, default=32, help="glyph canvas size")
    align.add_argument("--digits", type=int, default=16, help="examples to analyse")
    align.add_argument("--permutation", default=None, help="channel permutation, e.g. 1,0")
    align.add_argument("--channel", type=int, default=0, help="channel shown in the image grid")

    sweep = sub.add_parser("sweep", help="predicted vs applied rotation angle")
    _common(sweep)
    sweep.add_argument("--digits", type=int, default=100, help="test digits per angle")
    sweep.add_argument("--angles", type=int, default=72, help="angles evenly covering a full turn")

    compare = sub.add_parser("compare", help="train and evaluate a model x augmentation x seed table")
    _common(compare)
    compare.add_argument("--models", default="cnn,stn_c0,stn_c1,stn_sl1")
    compare.add_argument("--augmentations", default=None, help="comma-separated, e.g. rotation,translation")
    compare.add_argument("--seeds", default="1,2,3", help="comma-separated seeds")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging("stnlab", log_level=args.log_level)
    logger.info("Starting command", extra={"command": args.command})
    return run_command(COMMANDS[args.command], args)


if __name__ == "__main__":
    sys.exit(main())
