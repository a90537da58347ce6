"""Command-line interface.

Nine subcommands cover the stages (synth, preprocess, detect, prompt,
segment, evaluate, quantify, stats) plus a one-shot ``pipeline`` that
chains detect through quantify and writes the same artifacts as running
the stages individually.

Exit codes: 0 success, 1 runtime failure, 2 bad usage or configuration.
Every run logs its fully resolved configuration to stderr so the exact
run can be reproduced from the log alone.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline as stages
from .capillary import AreaMode, ErrorAggregation
from .config import ConfigError, RunConfig, load_config
from .evaluation import EvalMode
from .io import SchemaError
from .prompts import PromptMode

__all__ = ["main", "build_parser"]

logger = logging.getLogger("capseg")

_ENUM_FLAGS = {
    "prompt_mode": ("prompt_mode", PromptMode),
    "eval_mode": ("eval_mode", EvalMode),
    "area_mode": ("area_mode", AreaMode),
    "aggregation": ("error_aggregation", ErrorAggregation),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--jobs", type=int, help="worker threads for per-image stages")
    common.add_argument("--out", metavar="PATH", required=True, help="output directory")

    parser = argparse.ArgumentParser(
        prog="capseg",
        description="Synthetic-tissue capillarization benchmark: generate scenes, "
        "build segmentation prompts, score masks, and quantify capillarization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--scenes", type=int, help="number of scenes to generate")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("preprocess", parents=[common], help="denoise and stretch images")
    p.add_argument("--dataset", required=True, metavar="DIR")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("detect", parents=[common], help="produce detections.json")
    p.add_argument("--dataset", required=True, metavar="DIR")
    p.add_argument("--detector", choices=["oracle", "file"])
    p.add_argument("--detections", metavar="FILE", help="input for the file detector")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("prompt", parents=[common], help="turn detections into prompts.json")
    p.add_argument("--detections", required=True, metavar="FILE")
    p.add_argument("--prompt-mode", choices=[m.value for m in PromptMode])
    p.set_defaults(func=_cmd_prompt)

    p = sub.add_parser("segment", parents=[common], help="one mask per prompt -> masks.json")
    p.add_argument("--dataset", required=True, metavar="DIR")
    p.add_argument("--prompts", required=True, metavar="FILE")
    p.add_argument("--segmenter", choices=["clip", "degraded", "file"])
    p.add_argument("--masks", metavar="FILE", help="input for the file segmenter")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("evaluate", parents=[common], help="score masks against the dataset")
    p.add_argument("--dataset", required=True, metavar="DIR")
    p.add_argument("--masks", required=True, metavar="FILE")
    p.add_argument("--detections", metavar="FILE", help="confidence scores for ranking")
    p.add_argument("--mode", dest="eval_mode", choices=[m.value for m in EvalMode])
    p.add_argument("--thresholds", metavar="SPEC", help="'range' or e.g. '0.5,0.75'")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("quantify", parents=[common], help="capillarization report.csv")
    p.add_argument("--dataset", required=True, metavar="DIR")
    p.add_argument("--masks", metavar="FILE", help="predicted masks; omit to measure truth")
    p.add_argument("--detections", metavar="FILE")
    p.add_argument("--area-mode", dest="area_mode", choices=[m.value for m in AreaMode])
    p.add_argument(
        "--aggregation", choices=[m.value for m in ErrorAggregation], help="error averaging"
    )
    p.set_defaults(func=_cmd_quantify)

    p = sub.add_parser("stats", parents=[common], help="pairwise t-tests over report CSVs")
    p.add_argument("csvs", nargs="+", metavar="CSV")
    p.add_argument("--paired", action="store_true")
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("pipeline", parents=[common], help="detect through quantify in one go")
    p.add_argument("--dataset", required=True, metavar="DIR")
    p.add_argument("--detector", choices=["oracle", "file"])
    p.add_argument("--segmenter", choices=["clip", "degraded", "file"])
    p.add_argument("--prompt-mode", choices=[m.value for m in PromptMode])
    p.add_argument("--mode", dest="eval_mode", choices=[m.value for m in EvalMode])
    p.add_argument("--thresholds", metavar="SPEC")
    p.set_defaults(func=_cmd_pipeline)

    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(getattr(args, "config", None), seed_override=args.seed)
    overrides = {}
    for flag in ("jobs", "scenes", "thresholds", "alpha", "detector", "segmenter"):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[flag] = value
    for flag, (field_name, enum_cls) in _ENUM_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field_name] = enum_cls(value)
    if overrides:
        config = replace(config, **overrides)
    return config


def _cmd_synth(args: argparse.Namespace, config: RunConfig) -> int:
    manifest = stages.run_synth(config, args.out)
    for rec in manifest.images:
        anns = manifest.annotations_for(rec.id)
        n_cm = sum(1 for a in anns if a.category_id == 1)
        print(f"scene {rec.id}: {n_cm} muscle cells, {len(anns) - n_cm} capillaries ({rec.file})")
    print(f"wrote {len(manifest.images)} scenes to {args.out}")
    return 0


def _cmd_preprocess(args: argparse.Namespace, config: RunConfig) -> int:
    stages.run_preprocess(args.dataset, config, args.out)
    print(f"preprocessed dataset written to {args.out}")
    return 0


def _cmd_detect(args: argparse.Namespace, config: RunConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    detections = stages.run_detect(
        args.dataset, config, out / "detections.json", detections_in=args.detections
    )
    total = sum(len(dets) for dets in detections.values())
    print(f"{total} detections across {len(detections)} images -> {out / 'detections.json'}")
    return 0


def _cmd_prompt(args: argparse.Namespace, config: RunConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prompts = stages.run_prompt(args.detections, config, out / "prompts.json")
    total = sum(len(ps) for ps in prompts.values())
    print(f"{total} prompts ({config.prompt_mode.value}) -> {out / 'prompts.json'}")
    return 0


def _cmd_segment(args: argparse.Namespace, config: RunConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = stages.run_segment(
        args.dataset, args.prompts, config, out / "masks.json", masks_in=args.masks
    )
    print(f"{len(records)} masks -> {out / 'masks.json'}")
    return 0


def _cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> int:
    doc = stages.run_evaluate(
        args.dataset, args.masks, config, args.out, detections_path=args.detections
    )
    for key, value in doc["summary"].items():
        print(f"{key} = {value}")
    return 0


def _cmd_quantify(args: argparse.Namespace, config: RunConfig) -> int:
    stages.run_quantify(
        args.dataset, config, args.out, masks_path=args.masks, detections_path=args.detections
    )
    print(f"capillarization report -> {Path(args.out) / 'report.csv'}")
    return 0


def _cmd_stats(args: argparse.Namespace, config: RunConfig) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = stages.run_stats(args.csvs, config, out / "significance.csv", paired=args.paired)
    print(f"{len(rows)} comparisons -> {out / 'significance.csv'}")
    return 0


def _cmd_pipeline(args: argparse.Namespace, config: RunConfig) -> int:
    result = stages.run_pipeline(args.dataset, config, args.out)
    for key, value in result["evaluation"]["summary"].items():
        print(f"{key} = {value}")
    print(f"artifacts in {args.out}")
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
    except ConfigError as exc:
        print(f"capseg: config error: {exc}", file=sys.stderr)
        return 2
    except (SchemaError, ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"capseg: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
