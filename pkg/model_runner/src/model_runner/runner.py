"""Run configuration and the file-to-file operations.

The runner is an adapter: images and prompts in, detections and masks out,
everything exchanged through the documented JSON files and nothing through a
shared runtime. :class:`RunnerConfig` carries the paths and knobs every
operation needs; construction validates them eagerly so a bad value fails
before any image is read.

Each operation ends with a self-check pass that re-reads the file it just
wrote and validates it from the bytes up, including the one-mask-per-prompt
cardinality. A process that exits 0 has therefore never shipped a malformed
artifact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .checkpoints import default_checkpoint_path, load_checkpoint
from .images import RunnerError, load_image, scan_image_dir
from .inference import detect_image, everything_image, segment_image
from .interchange import (
    SchemaError,
    read_prompts,
    self_check_detections,
    self_check_masks,
    write_detections,
    write_masks,
)

__all__ = ["RunnerConfigError", "RunnerConfig", "run_detector", "run_segmenter", "run_everything"]

logger = logging.getLogger("model_runner")


class RunnerConfigError(ValueError):
    """A runner configuration value is invalid or points nowhere."""


def _as_device(value: str) -> str:
    """Only the CPU backend exists in this build; reject anything else."""
    name, _, index = value.partition(":")
    if name != "cpu" or (index and not index.isdigit()):
        raise RunnerConfigError(
            f"device {value!r} is not available in this build; use 'cpu'"
        )
    return value


@dataclass(frozen=True)
class RunnerConfig:
    """Validated settings for one inference run.

    ``deterministic`` asks the backend to pin every stochastic inference
    choice; the reference backends are deterministic by construction, so
    the flag is recorded for parity with tensor backends and changes
    nothing here.
    """

    image_dir: Path
    detector_checkpoint: Path = field(default_factory=lambda: default_checkpoint_path("detector"))
    segmenter_checkpoint: Path = field(
        default_factory=lambda: default_checkpoint_path("segmenter")
    )
    device: str = "cpu"
    confidence_floor: float = 0.0
    deterministic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "image_dir", Path(self.image_dir))
        object.__setattr__(self, "detector_checkpoint", Path(self.detector_checkpoint))
        object.__setattr__(self, "segmenter_checkpoint", Path(self.segmenter_checkpoint))
        if not self.image_dir.is_dir():
            raise RunnerConfigError(f"image directory does not exist: {self.image_dir}")
        for name in ("detector_checkpoint", "segmenter_checkpoint"):
            path = getattr(self, name)
            if not path.is_file():
                raise RunnerConfigError(f"{name.replace('_', ' ')} does not exist: {path}")
        _as_device(self.device)
        floor = self.confidence_floor
        if isinstance(floor, bool) or not isinstance(floor, (int, float)):
            raise RunnerConfigError(f"confidence floor must be a number, got {floor!r}")
        if not 0.0 <= floor < 1.0:
            raise RunnerConfigError(f"confidence floor must be in [0, 1), got {floor}")
        object.__setattr__(self, "confidence_floor", float(floor))

    def to_dict(self) -> dict:
        return {
            "image_dir": str(self.image_dir),
            "detector_checkpoint": str(self.detector_checkpoint),
            "segmenter_checkpoint": str(self.segmenter_checkpoint),
            "device": self.device,
            "confidence_floor": self.confidence_floor,
            "deterministic": self.deterministic,
        }


def run_detector(config: RunnerConfig, out_dir: str | Path) -> Path:
    """Detect every image in the directory; writes and self-checks detections.json."""
    checkpoint = load_checkpoint(config.detector_checkpoint, "detector")
    paths = scan_image_dir(config.image_dir)
    records = {}
    for image_id, path in paths.items():
        image = load_image(path)
        records[image_id] = detect_image(image, checkpoint, image_id, config.confidence_floor)
        logger.info("image %d: %d detections", image_id, len(records[image_id]))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "detections.json"
    write_detections(records, target)
    count = self_check_detections(target)
    logger.info("self-check passed: %d detections across %d images", count, len(paths))
    return target


def run_segmenter(config: RunnerConfig, prompts_path: str | Path, out_dir: str | Path) -> Path:
    """Answer every prompt with one mask; writes and self-checks masks.json."""
    checkpoint = load_checkpoint(config.segmenter_checkpoint, "segmenter")
    paths = scan_image_dir(config.image_dir)
    prompts = read_prompts(prompts_path)
    unknown = sorted(set(prompts) - set(paths))
    if unknown:
        raise RunnerError(
            "prompts reference unknown image ids: " + ", ".join(str(i) for i in unknown)
        )
    records = []
    dims: dict[int, tuple[int, int]] = {}
    for image_id, image_prompts in prompts.items():
        image = load_image(paths[image_id])
        dims[image_id] = (image.shape[0], image.shape[1])
        records.extend(segment_image(image, image_prompts, checkpoint, image_id))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "masks.json"
    write_masks(records, target)
    count = self_check_masks(target, dims)
    expected = sum(len(v) for v in prompts.values())
    if count != expected:
        raise SchemaError(
            f"self-check {target}: {count} masks for {expected} prompts, cardinality violated"
        )
    logger.info("self-check passed: %d masks, one per prompt", count)
    return target


def run_everything(
    config: RunnerConfig, seed: int, out_dir: str | Path
) -> tuple[Path, Path]:
    """Prompt-free baseline over the whole directory.

    Writes masks.json plus a paired detections.json whose per-image order
    matches the mask source ids, then self-checks both. Returns the two
    paths (masks first).
    """
    checkpoint = load_checkpoint(config.segmenter_checkpoint, "segmenter")
    paths = scan_image_dir(config.image_dir)
    detections = {}
    masks = []
    dims: dict[int, tuple[int, int]] = {}
    for image_id, path in paths.items():
        image = load_image(path)
        dims[image_id] = (image.shape[0], image.shape[1])
        image_dets, image_masks = everything_image(
            image, checkpoint, image_id, seed, config.confidence_floor
        )
        detections[image_id] = image_dets
        masks.extend(image_masks)
        logger.info("image %d: %d masks in everything mode", image_id, len(image_masks))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    masks_target = out / "masks.json"
    detections_target = out / "detections.json"
    write_masks(masks, masks_target)
    write_detections(detections, detections_target)
    mask_count = self_check_masks(masks_target, dims)
    det_count = self_check_detections(detections_target)
    if mask_count != det_count:
        raise SchemaError(
            f"self-check {masks_target}: {mask_count} masks but {det_count} detections"
        )
    logger.info("self-check passed: %d masks and detections", mask_count)
    return masks_target, detections_target
