"""Capillarization benchmark toolkit.

Synthetic myocardium scenes with exact ground truth, prompt construction
for promptable segmentation of densely packed cells, COCO-style instance
segmentation scoring, capillarization metrics (density per field area,
density per cell area, capillary-to-cell ratio), and Student's t-tests
for comparing runs. Everything is seeded and deterministic.
"""

from .backends import (
    ClipSegmenter,
    DegradationSpec,
    DegradedSegmenter,
    DetectorBackend,
    FileDetector,
    FileSegmenter,
    OracleDetector,
    SegmenterBackend,
    clip_segment,
    degrade_mask,
    oracle_detect,
)
from .capillary import (
    METRIC_FIELDS,
    AreaMode,
    ErrorAggregation,
    ErrorSummary,
    FovSpec,
    Measurements,
    aggregate_errors,
    assess,
    measure,
)
from .config import ConfigError, PreprocessConfig, RunConfig, config_from_dict, load_config
from .evaluation import (
    EvalMode,
    EvalReport,
    cross_category_hits,
    evaluate,
    f1_from,
    iou_thresholds,
    match_instances,
    pairwise_mask_iou,
)
from .instances import Category, InstanceMask, LabelImage
from .io import (
    AnnotationRecord,
    DatasetManifest,
    ImageRecord,
    MaskRecord,
    PredictionStore,
    SchemaError,
    dump_json,
    load_detections,
    load_image_png,
    load_image_raw,
    load_manifest,
    load_masks,
    load_predictions,
    load_prompts,
    polygon_to_mask,
    save_capillarization_csv,
    save_detections,
    save_errors_csv,
    save_image_png,
    save_image_raw,
    save_manifest,
    save_masks,
    save_predictions,
    save_prompts,
    validate_manifest,
    validate_predictions,
    write_csv,
)
from .masks import (
    BoundingBox,
    Point2,
    RleMask,
    box_iou,
    box_to_mask,
    mask_area_px,
    mask_iou,
    mask_tight_box,
    rle_area,
    rle_decode,
    rle_encode,
    rle_iou,
)
from .preprocess import contrast_stretch, preprocess_image, wiener3x3
from .prompts import (
    Detection,
    LabeledPoint,
    Prompt,
    PromptMode,
    PromptStats,
    generate_prompts,
    prompt_stats,
)
from .stats import (
    Comparison,
    RunSeries,
    SummaryStats,
    TTestResult,
    format_mean_sd,
    regularized_incomplete_beta,
    significance_table,
    summarize,
    t_test,
)
from .synth import SceneSpec, SyntheticScene, generate_scene, scene_to_dataset

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "AreaMode",
    "BoundingBox",
    "Category",
    "ClipSegmenter",
    "Comparison",
    "ConfigError",
    "DatasetManifest",
    "DegradationSpec",
    "DegradedSegmenter",
    "Detection",
    "DetectorBackend",
    "ErrorAggregation",
    "ErrorSummary",
    "EvalMode",
    "EvalReport",
    "FileDetector",
    "FileSegmenter",
    "FovSpec",
    "ImageRecord",
    "InstanceMask",
    "LabelImage",
    "LabeledPoint",
    "METRIC_FIELDS",
    "MaskRecord",
    "Measurements",
    "OracleDetector",
    "Point2",
    "PredictionStore",
    "PreprocessConfig",
    "Prompt",
    "PromptMode",
    "PromptStats",
    "RleMask",
    "RunConfig",
    "RunSeries",
    "SceneSpec",
    "SchemaError",
    "SegmenterBackend",
    "SummaryStats",
    "SyntheticScene",
    "TTestResult",
    "aggregate_errors",
    "assess",
    "box_iou",
    "box_to_mask",
    "clip_segment",
    "config_from_dict",
    "contrast_stretch",
    "cross_category_hits",
    "degrade_mask",
    "dump_json",
    "evaluate",
    "f1_from",
    "format_mean_sd",
    "generate_prompts",
    "generate_scene",
    "iou_thresholds",
    "load_config",
    "load_detections",
    "load_image_png",
    "load_image_raw",
    "load_manifest",
    "load_masks",
    "load_predictions",
    "load_prompts",
    "mask_area_px",
    "mask_iou",
    "mask_tight_box",
    "match_instances",
    "measure",
    "pairwise_mask_iou",
    "polygon_to_mask",
    "preprocess_image",
    "prompt_stats",
    "regularized_incomplete_beta",
    "rle_area",
    "rle_decode",
    "rle_encode",
    "rle_iou",
    "save_capillarization_csv",
    "save_detections",
    "save_errors_csv",
    "save_image_png",
    "save_image_raw",
    "save_manifest",
    "save_masks",
    "save_predictions",
    "save_prompts",
    "scene_to_dataset",
    "significance_table",
    "summarize",
    "t_test",
    "validate_manifest",
    "validate_predictions",
    "wiener3x3",
    "write_csv",
    "__version__",
]
