"""Command-line interface.

Two subcommands: ``detect`` turns an image directory into detections.json,
``segment`` answers prompts.json with masks.json. ``segment --everything``
is the prompt-free baseline; it needs no prompts file and writes a paired
detections.json alongside the masks so downstream ranking has scores.

Exit codes: 0 success, 1 runtime failure (including a checkpoint that does
not load and a self-check that fails), 2 bad usage or configuration. The
resolved configuration is logged to stderr so a run can be reproduced from
its log.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .checkpoints import CheckpointError
from .images import RunnerError
from .interchange import SchemaError
from .runner import RunnerConfig, RunnerConfigError, run_detector, run_everything, run_segmenter

__all__ = ["main", "build_parser"]

logger = logging.getLogger("model_runner")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--images", required=True, metavar="DIR", help="input image directory")
    common.add_argument("--out", required=True, metavar="DIR", help="output directory")
    common.add_argument("--detector-checkpoint", metavar="FILE", help="detector parameter file")
    common.add_argument("--segmenter-checkpoint", metavar="FILE", help="segmenter parameter file")
    common.add_argument("--device", default="cpu", help="compute device (default: cpu)")
    common.add_argument(
        "--min-confidence",
        type=float,
        default=0.0,
        metavar="X",
        help="drop detections scoring below X (default: 0)",
    )
    common.add_argument(
        "--deterministic",
        action="store_true",
        help="pin all stochastic inference choices (the reference backend already is)",
    )

    parser = argparse.ArgumentParser(
        prog="model-runner",
        description="File-based inference adapter: detections and prompt-driven masks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[common], help="image directory -> detections.json")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("segment", parents=[common], help="prompts.json -> masks.json")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--prompts", metavar="FILE", help="prompts to answer, one mask each")
    mode.add_argument(
        "--everything",
        action="store_true",
        help="prompt-free baseline: one mask per region, seeded random categories",
    )
    p.add_argument(
        "--seed", type=int, default=0, help="category seed for --everything (default: 0)"
    )
    p.set_defaults(func=_cmd_segment)
    return parser


def _resolve_config(args: argparse.Namespace) -> RunnerConfig:
    kwargs = {
        "image_dir": args.images,
        "device": args.device,
        "confidence_floor": args.min_confidence,
        "deterministic": args.deterministic,
    }
    if args.detector_checkpoint is not None:
        kwargs["detector_checkpoint"] = args.detector_checkpoint
    if args.segmenter_checkpoint is not None:
        kwargs["segmenter_checkpoint"] = args.segmenter_checkpoint
    return RunnerConfig(**kwargs)


def _cmd_detect(args: argparse.Namespace, config: RunnerConfig) -> int:
    target = run_detector(config, args.out)
    count = len(json.loads(target.read_text(encoding="utf-8"))["detections"])
    print(f"wrote {count} detections -> {target}")
    return 0


def _cmd_segment(args: argparse.Namespace, config: RunnerConfig) -> int:
    if args.everything:
        masks_target, detections_target = run_everything(config, args.seed, args.out)
        count = len(json.loads(masks_target.read_text(encoding="utf-8"))["masks"])
        print(f"wrote {count} masks (everything mode, seed {args.seed}) -> {masks_target}")
        print(f"wrote paired scores -> {detections_target}")
        return 0
    target = run_segmenter(config, args.prompts, args.out)
    count = len(json.loads(target.read_text(encoding="utf-8"))["masks"])
    print(f"wrote {count} masks (one per prompt) -> {target}")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve_config(args)
        logger.info("resolved config: %s", json.dumps(config.to_dict()))
        return args.func(args, config)
    except RunnerConfigError as exc:
        print(f"model-runner: config error: {exc}", file=sys.stderr)
        return 2
    except (CheckpointError, SchemaError, RunnerError, OSError, ValueError) as exc:
        print(f"model-runner: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
