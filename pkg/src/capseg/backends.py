"""Detector and segmenter backends behind narrow behavioral contracts.

The pipeline only assumes two interfaces: a detector mapping an image to
detections, and a segmenter mapping (image, prompt) to one mask per
prompt. Real neural models live out of process and are reached through
prediction files (see :mod:`capseg.io`); everything here is a
deterministic built-in:

* :class:`OracleDetector` reads detections straight off ground truth,
  optionally jittered for robustness tests.
* :class:`ClipSegmenter` is the idealized segmenter: it resolves a prompt
  against the ground-truth label image.
* :class:`DegradedSegmenter` corrupts the oracle mask in controlled ways
  (shift, erosion/dilation, pixel flips) before the prompt's constraints
  are applied, which makes metric behavior testable at known IoU levels.
* :class:`FileDetector` / :class:`FileSegmenter` replay predictions from
  a loaded store.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Protocol

import numpy as np
from scipy import ndimage

from .instances import LabelImage
from .masks import BoundingBox, Point2, box_iou, box_to_mask, mask_tight_box
from .prompts import Detection, Prompt

__all__ = [
    "DegradationSpec",
    "DetectorBackend",
    "SegmenterBackend",
    "OracleDetector",
    "ClipSegmenter",
    "DegradedSegmenter",
    "FileDetector",
    "FileSegmenter",
    "oracle_detect",
    "clip_segment",
    "degrade_mask",
]

logger = logging.getLogger(__name__)

# 4-connected structuring element, matching the synthetic generator's
# component definition.
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class DetectorBackend(Protocol):
    def detect(self, image_id: int, image: np.ndarray | None = None) -> list[Detection]: ...


class SegmenterBackend(Protocol):
    def segment(
        self, image_id: int, prompt: Prompt, image: np.ndarray | None = None
    ) -> np.ndarray: ...


@dataclass(frozen=True)
class DegradationSpec:
    """Controlled corruption of a mask: shift, then morphology, then pixel flips.

    At most one of ``erode_px`` / ``dilate_px`` may be non-zero. All
    randomness (pixel flips, jittered confidences) derives from ``seed``.
    """

    erode_px: int = 0
    dilate_px: int = 0
    shift: tuple[int, int] = (0, 0)
    flip_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.erode_px < 0 or self.dilate_px < 0:
            raise ValueError("erode_px and dilate_px must be >= 0")
        if self.erode_px > 0 and self.dilate_px > 0:
            raise ValueError("at most one of erode_px / dilate_px may be non-zero")
        if not 0.0 <= self.flip_prob < 1.0:
            raise ValueError(f"flip_prob must be in [0, 1), got {self.flip_prob}")


def oracle_detect(truth: LabelImage, jitter: DegradationSpec | None = None) -> list[Detection]:
    """One detection per ground-truth instance, ids assigned 0.. in instance order.

    Without jitter, boxes are exact tight boxes and every confidence is
    1.0. With jitter, boxes are shifted by ``jitter.shift`` (then clamped
    into image bounds) and confidences are drawn uniformly from [0.5, 1]
    using ``jitter.seed``, so repeated calls are identical.
    """
    detections = []
    rng = np.random.default_rng(jitter.seed) if jitter is not None else None
    for det_id, inst_id in enumerate(truth.instance_ids()):
        box = mask_tight_box(truth.instance_mask(inst_id))
        confidence = 1.0
        if jitter is not None:
            dx, dy = jitter.shift
            if dx or dy:
                box = box.shifted(dx, dy).clamped(truth.width, truth.height)
            confidence = float(rng.uniform(0.5, 1.0))
        detections.append(
            Detection(box=box, category=truth.categories[inst_id], confidence=confidence, id=det_id)
        )
    return detections


def _point_pixel(p: Point2, width: int, height: int) -> tuple[int, int]:
    """Pixel containing a point, clamped into bounds."""
    x = min(max(int(np.floor(p.x)), 0), width - 1)
    y = min(max(int(np.floor(p.y)), 0), height - 1)
    return x, y


def _best_box_match(truth: LabelImage, box: BoundingBox) -> int:
    """Instance whose tight box has the highest IoU with ``box`` (ties: lowest id)."""
    best_id, best_iou = -1, -1.0
    for inst_id in truth.instance_ids():
        iou = box_iou(box, mask_tight_box(truth.instance_mask(inst_id)))
        if iou > best_iou:
            best_id, best_iou = inst_id, iou
    return best_id


def _nearest_instance(truth: LabelImage, p: Point2) -> int:
    """Instance whose tight-box centroid is nearest to ``p`` (ties: lowest id)."""
    best_id, best_d = -1, np.inf
    for inst_id in truth.instance_ids():
        c = mask_tight_box(truth.instance_mask(inst_id)).centroid()
        d = (c.x - p.x) ** 2 + (c.y - p.y) ** 2
        if d < best_d:
            best_id, best_d = inst_id, d
    return best_id


def clip_segment(truth: LabelImage, prompt: Prompt) -> np.ndarray:
    """Resolve a prompt against ground truth: the idealized segmenter.

    The mask is the instance containing the positive point, minus the
    pixels of any instance containing a negative point, intersected with
    the box when one is present. When the positive point lands on
    background, the prompt box picks the instance with the best tight-box
    IoU instead (or, lacking a box, the instance with the nearest
    centroid). Points take priority over the box; the box only clips.

    Always returns one mask with the image's dimensions. If clipping
    would empty the mask, the unclipped instance is returned so that the
    one-mask-per-prompt contract holds.
    """
    if prompt.box is None and not prompt.points:
        raise ValueError(f"prompt {prompt.source_id} has neither box nor points")
    ids = truth.instance_ids()
    if not ids:
        raise ValueError("label image has no instances to segment")

    target = -1
    if prompt.points:
        pos = prompt.positive_point()
        if pos is None:
            raise ValueError(f"prompt {prompt.source_id} has points but no positive point")
        x, y = _point_pixel(pos, truth.width, truth.height)
        target = int(truth.labels[y, x])
        if target == 0:
            target = (
                _best_box_match(truth, prompt.box)
                if prompt.box is not None
                else _nearest_instance(truth, pos)
            )
    else:
        target = _best_box_match(truth, prompt.box)

    base = truth.instance_mask(target)
    out = base.copy()
    for lp in prompt.points:
        if lp.label == 0:
            x, y = _point_pixel(lp.point, truth.width, truth.height)
            neg = int(truth.labels[y, x])
            if neg > 0 and neg != target:
                out &= truth.labels != neg
    if prompt.box is not None:
        out &= box_to_mask(prompt.box, truth.width, truth.height)
    if not out.any():
        return base
    return out


def _shift_mask(m: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Translate without wraparound; pixels shifted in are background."""
    out = np.zeros_like(m)
    h, w = m.shape
    src_x = slice(max(0, -dx), min(w, w - dx))
    src_y = slice(max(0, -dy), min(h, h - dy))
    dst_x = slice(max(0, dx), min(w, w + dx))
    dst_y = slice(max(0, dy), min(h, h + dy))
    out[dst_y, dst_x] = m[src_y, src_x]
    return out


def degrade_mask(m: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    """Apply shift, then 4-connected erosion/dilation, then seeded pixel flips.

    Deterministic given ``spec.seed``. Raises if the result has no set
    pixels, so the caller can decide how to handle a fully destroyed mask.
    """
    m = np.asarray(m).astype(bool, copy=False)
    out = m
    dx, dy = spec.shift
    if dx or dy:
        out = _shift_mask(out, dx, dy)
    if spec.erode_px > 0:
        out = ndimage.binary_erosion(out, structure=_CROSS, iterations=spec.erode_px)
    elif spec.dilate_px > 0:
        out = ndimage.binary_dilation(out, structure=_CROSS, iterations=spec.dilate_px)
    if spec.flip_prob > 0.0:
        rng = np.random.default_rng(spec.seed)
        flips = rng.random(out.shape) < spec.flip_prob
        out = out ^ flips
    else:
        out = out.copy() if out is m else out
    if not out.any():
        raise ValueError("degradation produced an empty mask")
    return out


class OracleDetector:
    """Detector that reads ground truth, optionally jittered per image."""

    def __init__(self, truths: dict[int, LabelImage], jitter: DegradationSpec | None = None):
        self.truths = truths
        self.jitter = jitter

    def detect(self, image_id: int, image: np.ndarray | None = None) -> list[Detection]:
        truth = self.truths[image_id]
        jitter = self.jitter
        if jitter is not None:
            per_image = int(np.random.SeedSequence([jitter.seed, image_id]).generate_state(1)[0])
            jitter = replace(jitter, seed=per_image)
        return oracle_detect(truth, jitter)


class ClipSegmenter:
    """Perfect prompt resolver against ground truth."""

    def __init__(self, truths: dict[int, LabelImage]):
        self.truths = truths

    def segment(
        self, image_id: int, prompt: Prompt, image: np.ndarray | None = None
    ) -> np.ndarray:
        return clip_segment(self.truths[image_id], prompt)


class DegradedSegmenter:
    """Oracle segmenter with controlled corruption applied before prompt constraints.

    The target instance is resolved exactly as in :func:`clip_segment`,
    then degraded, and only then are the prompt's constraints applied:
    negative-point instances subtracted, box clipped. Box and points
    therefore recover part of the inflicted error, mode by mode, which is
    what makes prompt-mode comparisons meaningful on synthetic data.
    """

    def __init__(self, truths: dict[int, LabelImage], spec: DegradationSpec):
        self.truths = truths
        self.spec = spec

    def segment(
        self, image_id: int, prompt: Prompt, image: np.ndarray | None = None
    ) -> np.ndarray:
        truth = self.truths[image_id]
        # resolve the *uncorrupted* target first, without box clipping
        if prompt.points:
            pos = prompt.positive_point()
            x, y = _point_pixel(pos, truth.width, truth.height)
            target = int(truth.labels[y, x])
            if target == 0:
                target = (
                    _best_box_match(truth, prompt.box)
                    if prompt.box is not None
                    else _nearest_instance(truth, pos)
                )
        else:
            target = _best_box_match(truth, prompt.box)
        base = truth.instance_mask(target)

        per_prompt = int(
            np.random.SeedSequence([self.spec.seed, image_id, prompt.source_id]).generate_state(1)[0]
        )
        try:
            degraded = degrade_mask(base, replace(self.spec, seed=per_prompt))
        except ValueError:
            # fully destroyed mask: keep the one-mask-per-prompt contract
            return clip_segment(truth, prompt)

        out = degraded
        for lp in prompt.points:
            if lp.label == 0:
                x, y = _point_pixel(lp.point, truth.width, truth.height)
                neg = int(truth.labels[y, x])
                if neg > 0 and neg != target:
                    out = out & (truth.labels != neg)
        if prompt.box is not None:
            out = out & box_to_mask(prompt.box, truth.width, truth.height)
        if not out.any():
            return clip_segment(truth, prompt)
        return out


class FileDetector:
    """Replays detections loaded from a prediction store."""

    def __init__(self, detections_by_image: dict[int, list[Detection]]):
        self.detections_by_image = detections_by_image

    def detect(self, image_id: int, image: np.ndarray | None = None) -> list[Detection]:
        if image_id not in self.detections_by_image:
            logger.warning("no stored detections for image %d; returning none", image_id)
            return []
        return self.detections_by_image[image_id]


class FileSegmenter:
    """Replays masks loaded from a prediction store, matched by prompt source id."""

    def __init__(self, masks_by_image: dict[int, dict[int, np.ndarray]]):
        self.masks_by_image = masks_by_image

    def masks_for(self, image_id: int) -> dict[int, np.ndarray]:
        """All stored masks of one image, keyed by prompt source id."""
        if image_id not in self.masks_by_image:
            logger.warning("no stored masks for image %d; returning none", image_id)
            return {}
        return self.masks_by_image[image_id]

    def segment(
        self, image_id: int, prompt: Prompt, image: np.ndarray | None = None
    ) -> np.ndarray:
        stored = self.masks_for(image_id)
        if prompt.source_id not in stored:
            raise KeyError(
                f"no stored mask for image {image_id}, prompt source {prompt.source_id}"
            )
        return stored[prompt.source_id]
