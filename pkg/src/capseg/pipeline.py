"""File-to-file pipeline stages behind the command-line interface.

Each stage reads and writes only the documented artifact formats, so the
one-shot ``run_pipeline`` is literally the composition of the individual
stages and produces byte-identical files to running them one by one.
All stages are deterministic for a given configuration and seed; the
``jobs`` setting bounds worker threads but never changes output content
or ordering.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Mapping, Sequence, TypeVar

import numpy as np

from . import io as dataset_io
from .backends import ClipSegmenter, DegradedSegmenter, OracleDetector, SegmenterBackend
from .capillary import FovSpec, Measurements, aggregate_errors, assess, measure
from .config import ConfigError, RunConfig
from .evaluation import EvalMode, cross_category_hits, evaluate, iou_thresholds
from .instances import Category, InstanceMask, LabelImage
from .masks import rle_encode
from .prompts import Detection, Prompt, generate_prompts
from .preprocess import preprocess_image
from .stats import RunSeries, significance_table, t_test
from .synth import SceneSpec, SyntheticScene, generate_scene, scene_to_dataset

__all__ = [
    "run_synth",
    "run_preprocess",
    "run_detect",
    "run_prompt",
    "run_segment",
    "run_evaluate",
    "run_quantify",
    "run_stats",
    "run_pipeline",
]

logger = logging.getLogger(__name__)

_T = TypeVar("_T")


def _map_ordered(fn: Callable[[_T], object], items: Sequence[_T], jobs: int) -> list:
    """Apply fn across items, possibly in threads; results in input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _scene_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def run_synth(config: RunConfig, out_dir: str | Path) -> dataset_io.DatasetManifest:
    """Generate ``config.scenes`` scenes and write them as a dataset directory."""

    def build(index: int) -> SyntheticScene:
        return generate_scene(replace(config.scene, seed=_scene_seed(config.seed, index)))

    scenes = _map_ordered(build, list(range(config.scenes)), config.jobs)
    manifest = scene_to_dataset(scenes, out_dir)
    for line in dataset_io.validate_manifest(manifest):
        logger.warning("synth validator: %s", line)
    return manifest


def run_preprocess(dataset_dir: str | Path, config: RunConfig, out_dir: str | Path) -> None:
    """Filter and stretch every image; annotations carry over unchanged."""
    dataset_dir = Path(dataset_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = dataset_io.load_manifest(dataset_dir / "dataset.json")

    def process(rec: dataset_io.ImageRecord) -> None:
        image = dataset_io.load_image_png(dataset_dir / rec.file)
        cleaned = preprocess_image(
            image,
            noise_var=config.preprocess.noise_var,
            low_pct=config.preprocess.low_pct,
            high_pct=config.preprocess.high_pct,
        )
        dataset_io.save_image_png(cleaned, out / rec.file)

    _map_ordered(process, manifest.images, config.jobs)
    dataset_io.save_manifest(manifest, out / "dataset.json")


def _truths(manifest: dataset_io.DatasetManifest) -> dict[int, LabelImage]:
    return {rec.id: manifest.truth_label_image(rec.id) for rec in manifest.images}


def run_detect(
    dataset_dir: str | Path,
    config: RunConfig,
    out_path: str | Path,
    detections_in: str | Path | None = None,
) -> dict[int, list[Detection]]:
    """Oracle detection from ground truth, or validation+copy of a file store."""
    manifest = dataset_io.load_manifest(Path(dataset_dir) / "dataset.json")
    if config.detector == "file":
        if detections_in is None:
            raise ConfigError("detector 'file' needs a detections file (--detections)")
        detections = dataset_io.load_detections(detections_in)
        store = dataset_io.PredictionStore(detections_by_image=detections)
        dataset_io.validate_predictions(store, manifest)
    else:
        oracle = OracleDetector(_truths(manifest))
        detections = {rec.id: oracle.detect(rec.id) for rec in manifest.images}
    dataset_io.save_detections(detections, out_path)
    return detections


def run_prompt(
    detections_path: str | Path, config: RunConfig, out_path: str | Path
) -> dict[int, list[Prompt]]:
    detections = dataset_io.load_detections(detections_path)
    prompts = {
        image_id: generate_prompts(dets, config.prompt_mode)
        for image_id, dets in sorted(detections.items())
    }
    dataset_io.save_prompts(prompts, out_path)
    return prompts


def _build_segmenter(
    config: RunConfig, truths: dict[int, LabelImage]
) -> SegmenterBackend:
    if config.segmenter == "clip":
        return ClipSegmenter(truths)
    if config.segmenter == "degraded":
        if config.degradation is None:
            raise ConfigError("segmenter 'degraded' requires a degradation section")
        return DegradedSegmenter(truths, config.degradation)
    raise ConfigError(f"segmenter {config.segmenter!r} cannot run in-process")


def run_segment(
    dataset_dir: str | Path,
    prompts_path: str | Path,
    config: RunConfig,
    out_path: str | Path,
    masks_in: str | Path | None = None,
) -> list[dataset_io.MaskRecord]:
    """One mask per prompt via the configured backend; file backend copies through."""
    manifest = dataset_io.load_manifest(Path(dataset_dir) / "dataset.json")
    prompts_by_image = dataset_io.load_prompts(prompts_path)
    if config.segmenter == "file":
        if masks_in is None:
            raise ConfigError("segmenter 'file' needs a masks file (--masks)")
        records = dataset_io.load_masks(masks_in)
        store = dataset_io.PredictionStore(mask_records=records)
        dataset_io.validate_predictions(store, manifest)
        dataset_io.save_masks(records, out_path)
        return records

    segmenter = _build_segmenter(config, _truths(manifest))

    def segment_image(image_id: int) -> list[dataset_io.MaskRecord]:
        out = []
        for prompt in prompts_by_image.get(image_id, []):
            mask = segmenter.segment(image_id, prompt)
            out.append(
                dataset_io.MaskRecord(
                    image_id=image_id,
                    prompt_source_id=prompt.source_id,
                    category=prompt.category,
                    rle=rle_encode(mask),
                )
            )
        return out

    image_ids = sorted(prompts_by_image)
    per_image = _map_ordered(segment_image, image_ids, config.jobs)
    records = [rec for chunk in per_image for rec in chunk]
    dataset_io.save_masks(records, out_path)
    return records


def _predicted_instances(
    manifest: dataset_io.DatasetManifest,
    masks_path: str | Path,
    detections_path: str | Path | None,
) -> dict[int, list[InstanceMask]]:
    """Join stored masks with detection confidences into scored instances."""
    records = dataset_io.load_masks(masks_path)
    store = dataset_io.PredictionStore(mask_records=records)
    dataset_io.validate_predictions(store, manifest)
    scores: dict[int, dict[int, float]] = {}
    if detections_path is not None:
        for image_id, dets in dataset_io.load_detections(detections_path).items():
            scores[image_id] = {d.id: d.confidence for d in dets}
    out: dict[int, list[InstanceMask]] = {rec.id: [] for rec in manifest.images}
    for image_id, by_source in sorted(store.masks_by_image().items()):
        for source_id, rec in sorted(by_source.items()):
            mask = rec.mask()
            if not mask.any():
                logger.warning(
                    "image %d prompt %d: empty predicted mask skipped", image_id, source_id
                )
                continue
            score = scores.get(image_id, {}).get(source_id, 1.0)
            out.setdefault(image_id, []).append(
                InstanceMask(mask=mask, category=rec.category, score=score, id=source_id)
            )
    return out


def _threshold_specs(config: RunConfig) -> list[tuple[str, tuple[float, ...]]]:
    """Rows to report: each single threshold, plus 'range' for the full grid."""
    grid = config.resolved_thresholds()
    rows: list[tuple[str, tuple[float, ...]]] = [(str(t), (t,)) for t in grid]
    if grid == iou_thresholds():
        rows.append(("range", grid))
    return rows


def run_evaluate(
    dataset_dir: str | Path,
    masks_path: str | Path,
    config: RunConfig,
    out_dir: str | Path,
    detections_path: str | Path | None = None,
) -> dict:
    """Score predictions against the manifest; writes evaluation.json and .csv."""
    manifest = dataset_io.load_manifest(Path(dataset_dir) / "dataset.json")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truths = {rec.id: manifest.instances_for(rec.id) for rec in manifest.images}
    preds = _predicted_instances(manifest, masks_path, detections_path)

    grid = config.resolved_thresholds()
    report = evaluate(truths, preds, mode=config.eval_mode, thresholds=grid)

    def subset(instances_by_image, category):
        return {
            image_id: [inst for inst in instances if inst.category is category]
            for image_id, instances in instances_by_image.items()
        }

    csv_rows = []
    for label, selector in (("CM", Category.CM), ("CAP", Category.CAP), ("ALL", None)):
        if selector is None:
            sub_report = report
        else:
            try:
                sub_report = evaluate(
                    subset(truths, selector),
                    subset(preds, selector),
                    mode=config.eval_mode,
                    thresholds=grid,
                )
            except ValueError:
                continue  # category absent from this dataset
        for spec, values in _threshold_specs(config):
            if len(values) == 1:
                map_v = sub_report.map_at(values[0])
                mar_v = sub_report.mar_at(values[0])
                f1_v = sub_report.f1_at(values[0])
            else:
                map_v, mar_v, f1_v = (
                    sub_report.map_range,
                    sub_report.mar_range,
                    sub_report.f1_range,
                )
            csv_rows.append([config.eval_mode.value, spec, label, map_v, mar_v, f1_v])
    dataset_io.write_csv(out / "evaluation.csv", dataset_io.EVALUATION_COLUMNS, csv_rows)

    diagnostics = sum(
        cross_category_hits(truths[image_id], preds.get(image_id, []), 0.5)
        for image_id in truths
    )
    doc = {
        "mode": report.mode.value,
        "thresholds": list(report.thresholds),
        "map_by_threshold": list(report.map_by_threshold),
        "mar_by_threshold": list(report.mar_by_threshold),
        "summary": report.as_dict(),
        "diagnostics": {"cross_category_hits@0.5": diagnostics},
    }
    dataset_io.dump_json(doc, out / "evaluation.json")
    return doc


def _fov_for(rec: dataset_io.ImageRecord) -> FovSpec:
    return FovSpec(
        width_um=rec.fov_um[0],
        height_um=rec.fov_um[1],
        width_px=rec.width,
        height_px=rec.height,
    )


def run_quantify(
    dataset_dir: str | Path,
    config: RunConfig,
    out_dir: str | Path,
    masks_path: str | Path | None = None,
    detections_path: str | Path | None = None,
) -> dict:
    """Capillarization measurements; with predictions, also errors vs truth.

    Without a masks file the ground-truth annotations themselves are
    measured (report.csv only). With one, report.csv holds the predicted
    measurements and errors.csv the per-image relative errors.
    """
    manifest = dataset_io.load_manifest(Path(dataset_dir) / "dataset.json")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def measure_by_image(instances_by_image) -> list[tuple[int, Measurements]]:
        rows = []
        for rec in manifest.images:
            fov = _fov_for(rec)
            rows.append((rec.id, measure(instances_by_image.get(rec.id, []), fov, config.area_mode)))
        return rows

    truth_rows = measure_by_image(
        {rec.id: manifest.instances_for(rec.id) for rec in manifest.images}
    )
    summary: dict = {}
    if masks_path is None:
        dataset_io.save_capillarization_csv(
            [(image_id, m.as_dict()) for image_id, m in truth_rows], out / "report.csv"
        )
    else:
        pred_rows = measure_by_image(_predicted_instances(manifest, masks_path, detections_path))
        dataset_io.save_capillarization_csv(
            [(image_id, m.as_dict()) for image_id, m in pred_rows], out / "report.csv"
        )
        truth_by_id = dict(truth_rows)
        error_rows = [
            (image_id, assess(pred, truth_by_id[image_id])) for image_id, pred in pred_rows
        ]
        dataset_io.save_errors_csv(error_rows, out / "errors.csv")
        aggregates = aggregate_errors([err for _, err in error_rows], config.error_aggregation)
        summary = {
            "aggregation": config.error_aggregation.value,
            "errors": {
                name: {
                    "mean": agg.mean,
                    "sd": agg.sd,
                    "n_used": agg.n_used,
                    "n_excluded": agg.n_excluded,
                }
                for name, agg in aggregates.items()
            },
        }
        dataset_io.dump_json(summary, out / "errors_summary.json")
    return summary


def _read_metric_csv(path: str | Path) -> dict[str, list[float | None]]:
    """Columns of a report-style CSV as named series; blank cells become None."""
    import csv as _csv

    with open(path, encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise dataset_io.SchemaError(f"{path}: empty CSV") from None
        rows = list(reader)
    out: dict[str, list[float | None]] = {}
    for j, name in enumerate(header):
        if name == "image_id":
            continue
        column: list[float | None] = []
        for i, row in enumerate(rows):
            cell = row[j] if j < len(row) else ""
            if cell == "":
                column.append(None)
                continue
            try:
                column.append(float(cell))
            except ValueError:
                raise dataset_io.SchemaError(
                    f"{path}: row {i + 1} column {name!r}: not a number: {cell!r}"
                ) from None
        out[name] = column
    return out


def run_stats(
    csv_paths: Sequence[str | Path],
    config: RunConfig,
    out_path: str | Path,
    paired: bool = False,
) -> list[list]:
    """Pairwise t-tests between same-named metric columns of the input CSVs."""
    if len(csv_paths) < 2:
        raise ConfigError("stats needs at least two CSV files to compare")
    labels = [Path(p).stem for p in csv_paths]
    if len(set(labels)) != len(labels):
        raise ConfigError("stats input files must have distinct names")
    tables = {label: _read_metric_csv(p) for label, p in zip(labels, csv_paths)}
    common = [m for m in tables[labels[0]] if all(m in tables[lab] for lab in labels)]
    rows = []
    kind = "paired" if paired else "unpaired"
    for metric in common:
        for i in range(len(labels)):
            for j in range(i + 1, len(labels)):
                a, b = labels[i], labels[j]
                xs, ys = tables[a][metric], tables[b][metric]
                if paired:
                    if len(xs) != len(ys):
                        raise ConfigError(
                            f"paired test needs equal row counts for {a} and {b}"
                        )
                    kept = [(x, y) for x, y in zip(xs, ys) if x is not None and y is not None]
                    xs = [x for x, _ in kept]
                    ys = [y for _, y in kept]
                else:
                    xs = [x for x in xs if x is not None]
                    ys = [y for y in ys if y is not None]
                if len(xs) < 2 or len(ys) < 2:
                    logger.warning("metric %s: too few values for %s vs %s", metric, a, b)
                    continue
                result = t_test(xs, ys, paired=paired)
                rows.append(
                    [
                        metric,
                        a,
                        b,
                        kind,
                        result.statistic,
                        result.df,
                        result.p_value,
                        result.p_value < config.alpha,
                    ]
                )
    dataset_io.write_csv(out_path, dataset_io.SIGNIFICANCE_COLUMNS, rows)
    return rows


def run_pipeline(dataset_dir: str | Path, config: RunConfig, out_dir: str | Path) -> dict:
    """detect -> prompt -> segment -> evaluate -> quantify, all through files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_detect(dataset_dir, config, out / "detections.json")
    run_prompt(out / "detections.json", config, out / "prompts.json")
    run_segment(dataset_dir, out / "prompts.json", config, out / "masks.json")
    evaluation = run_evaluate(
        dataset_dir, out / "masks.json", config, out, detections_path=out / "detections.json"
    )
    quant = run_quantify(
        dataset_dir,
        config,
        out,
        masks_path=out / "masks.json",
        detections_path=out / "detections.json",
    )
    return {"evaluation": evaluation, "quantify": quant}
