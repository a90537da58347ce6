"""File-based inference adapter for the capseg pipeline.

Runs a detector and a promptable segmenter as a separate process and
exchanges everything with the core through the documented JSON files:
images and prompts in, detections and masks out. The package imports
nothing from the core; reference classical backends stand in behind the
checkpoint interface so the whole path is testable without pretrained
weights or an accelerator.
"""

from .checkpoints import (
    CheckpointError,
    DetectorCheckpoint,
    SegmenterCheckpoint,
    default_checkpoint_path,
    load_checkpoint,
)
from .images import RunnerError, load_image, scan_image_dir
from .interchange import (
    DetectionRecord,
    MaskRecord,
    PromptRecord,
    SchemaError,
    decode_mask,
    encode_mask,
    read_prompts,
    self_check_detections,
    self_check_masks,
    write_detections,
    write_masks,
)
from .runner import (
    RunnerConfig,
    RunnerConfigError,
    run_detector,
    run_everything,
    run_segmenter,
)

__all__ = [
    "CheckpointError",
    "DetectorCheckpoint",
    "SegmenterCheckpoint",
    "default_checkpoint_path",
    "load_checkpoint",
    "RunnerError",
    "load_image",
    "scan_image_dir",
    "DetectionRecord",
    "MaskRecord",
    "PromptRecord",
    "SchemaError",
    "decode_mask",
    "encode_mask",
    "read_prompts",
    "self_check_detections",
    "self_check_masks",
    "write_detections",
    "write_masks",
    "RunnerConfig",
    "RunnerConfigError",
    "run_detector",
    "run_everything",
    "run_segmenter",
]

__version__ = "0.1.0"
