"""Command line entry point.

    gradevents encode      --input FRAMES/ --output clip.gev [--rc] [--timestamps ts.txt]
    gradevents decode      --input clip.gev --output TERNARY/
    gradevents reconstruct --input clip.gev --output RECON/ [--gt FRAMES/ | --mean-bias 0.45]
    gradevents eval        --input RECON/ --gt FRAMES/ [--events clip.gev] [--output report.jsonl]
    gradevents stats       --input clip.gev [--output stats.json]

Exit status: 0 on success, 1 for invalid arguments or data, 2 for I/O errors.
"""
import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .codec import StreamFormatError

log = logging.getLogger("gradevents")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

COMMANDS = {
    "encode": pipeline.cmd_encode,
    "decode": pipeline.cmd_decode,
    "reconstruct": pipeline.cmd_reconstruct,
    "eval": pipeline.cmd_eval,
    "stats": pipeline.cmd_stats,
}


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(f"{self.prog}: {message}")


def _thresholds(text):
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("at least one threshold is required")
    return values


def _mean_bias(text):
    if text.strip().lower() == "gt":
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'gt', got {text!r}") from None


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--input", type=Path, help="frame directory or GEV1 stream")
    common.add_argument("--output", type=Path, help="output file or directory")
    common.add_argument("--thresholds", type=_thresholds, default=pipeline.DEFAULT_THRESHOLDS,
                        help="8-bit threshold numerators, e.g. 4,8,16")
    common.add_argument("--rc", action="store_true", help="resolution compression")
    common.add_argument("--alpha", type=float, default=1.97, help="over-relaxation factor in [1,2]")
    common.add_argument("--iters", type=int, default=100, help="SOR iterations")
    common.add_argument("--scale", type=float, default=3.6, help="Laplacian scaling constant")
    common.add_argument("--mean-bias", type=_mean_bias, default=None,
                        help="output mean: a number in [0,1] or 'gt' (default) for the ground-truth mean")
    common.add_argument("--warm-start", action="store_true",
                        help="start each SOR solve from the previous frame")
    common.add_argument("--timestamps", type=Path, help="sidecar file, one microsecond value per line")
    common.add_argument("--gt", type=Path, help="ground-truth frame directory")
    common.add_argument("--events", type=Path, help="GEV1 stream whose event probabilities go into the report")
    common.add_argument("--workers", type=int, default=1, help="threads per SOR half-sweep")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="gradevents", description="Gradient event camera emulation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or "").strip().split("\n")[0] or name)
    return parser


def config_from_args(args) -> pipeline.RunConfig:
    return pipeline.RunConfig(
        input=args.input, output=args.output, thresholds=args.thresholds, compressed=args.rc,
        alpha=args.alpha, iterations=args.iters, scale=args.scale, mean_bias=args.mean_bias,
        warm_start=args.warm_start, timestamps=args.timestamps, ground_truth=args.gt,
        events=args.events, workers=args.workers)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _ArgumentError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        COMMANDS[args.command](cfg)
    except (OSError, StreamFormatError) as exc:
        print(f"gradevents {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"gradevents {args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
