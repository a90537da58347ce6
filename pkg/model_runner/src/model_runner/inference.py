"""Reference inference: detection, prompt-guided masks, everything mode.

These are the classical stand-ins behind the checkpoint interface. They run
anywhere, need no accelerator, and are fully deterministic, which makes the
adapter testable end to end; a tensor-based backend would slot in behind the
same three functions.

Detection labels each foreground region CM or CAP by area against the
checkpoint's ``cm_min_area_px`` split. Prompt-guided segmentation scores
every candidate region against the prompt (box agreement, positive point
hits, negative point penalties) and keeps the highest-scoring mask; when a
prompt carries a box the winning region is clipped to it. Several candidates
per prompt are normal, so each selection is recorded in the log with the
losing count. Everything mode emits one mask per region with a seeded random
category, the prompt-free baseline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .checkpoints import DetectorCheckpoint, SegmenterCheckpoint
from .interchange import DetectionRecord, MaskRecord, PromptRecord, encode_mask
from .regions import RegionMap, extract_regions

__all__ = ["detect_image", "segment_image", "everything_image"]

logger = logging.getLogger("model_runner")


def detect_image(
    image: np.ndarray, checkpoint: DetectorCheckpoint, image_id: int, confidence_floor: float
) -> list[DetectionRecord]:
    """All regions of one image as detections, raster order, floor applied."""
    rmap = extract_regions(
        image, checkpoint.binarize, checkpoint.min_area_px, checkpoint.connectivity
    )
    out = []
    for region in rmap.regions:
        score = rmap.confidence(
            region, checkpoint.contrast_gain, checkpoint.size_margin_areas, checkpoint.min_area_px
        )
        if score < confidence_floor:
            continue
        category_id = 1 if region.area_px >= checkpoint.cm_min_area_px else 2
        out.append(
            DetectionRecord(
                image_id=image_id, category_id=category_id, bbox=region.box_xywh, score=score
            )
        )
    return out


# ---------------------------------------------------------------------------
# prompt-guided segmentation


@dataclass(frozen=True)
class _Candidate:
    label: int
    mask: np.ndarray
    score: float


def _clip_window(box, shape) -> tuple[int, int, int, int]:
    x0, y0, x1, y1 = box
    h, w = shape
    r0 = min(max(int(np.floor(y0)), 0), h)
    r1 = min(max(int(np.ceil(y1)), 0), h)
    c0 = min(max(int(np.floor(x0)), 0), w)
    c1 = min(max(int(np.ceil(x1)), 0), w)
    return r0, r1, c0, c1


def _box_iou(a, b) -> float:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


def _tight_xyxy(mask: np.ndarray) -> tuple[float, float, float, float]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return (
        float(cols[0]),
        float(rows[0]),
        float(cols[-1] + 1),
        float(rows[-1] + 1),
    )


def _point_hits(mask: np.ndarray, points, label: int) -> tuple[int, int]:
    """(hits, total) for prompt points with the given label."""
    h, w = mask.shape
    hits = total = 0
    for x, y, point_label in points:
        if point_label != label:
            continue
        total += 1
        row = min(max(int(np.floor(y)), 0), h - 1)
        col = min(max(int(np.floor(x)), 0), w - 1)
        if mask[row, col]:
            hits += 1
    return hits, total


def _score_candidate(
    mask: np.ndarray, prompt: PromptRecord, checkpoint: SegmenterCheckpoint
) -> float:
    score = 0.0
    if prompt.box is not None:
        score += checkpoint.box_weight * _box_iou(_tight_xyxy(mask), prompt.box)
    pos_hits, pos_total = _point_hits(mask, prompt.points, 1)
    if pos_total:
        score += checkpoint.point_weight * pos_hits / pos_total
    neg_hits, neg_total = _point_hits(mask, prompt.points, 0)
    if neg_total:
        score -= checkpoint.negative_penalty * neg_hits / neg_total
    return score


def _candidates_for(
    rmap: RegionMap, prompt: PromptRecord, checkpoint: SegmenterCheckpoint
) -> list[_Candidate]:
    found = []
    for region in rmap.regions:
        if prompt.box is not None:
            x, y, w, h = region.box_xywh
            if _box_iou((x, y, x + w, y + h), prompt.box) == 0.0:
                continue
            mask = rmap.mask_of(region.label)
            r0, r1, c0, c1 = _clip_window(prompt.box, mask.shape)
            clipped = np.zeros_like(mask)
            clipped[r0:r1, c0:c1] = mask[r0:r1, c0:c1]
            if not clipped.any():
                continue
            mask = clipped
        else:
            mask = rmap.mask_of(region.label)
            hits, _ = _point_hits(mask, prompt.points, 1)
            if hits == 0:
                continue
        found.append(
            _Candidate(
                label=region.label, mask=mask, score=_score_candidate(mask, prompt, checkpoint)
            )
        )
    return found


def segment_image(
    image: np.ndarray,
    prompts: list[PromptRecord],
    checkpoint: SegmenterCheckpoint,
    image_id: int,
) -> list[MaskRecord]:
    """One mask per prompt, in prompt order.

    Every candidate region is scored against the prompt and the best one
    wins; the choice is logged with the candidate count so a surprising
    mask can be traced back to its competition. A prompt that matches no
    region at all yields an empty mask (cardinality still holds) and a
    warning.
    """
    rmap = extract_regions(
        image, checkpoint.binarize, checkpoint.min_area_px, checkpoint.connectivity
    )
    records = []
    for prompt in prompts:
        found = _candidates_for(rmap, prompt, checkpoint)
        if found:
            best = max(found, key=lambda c: (c.score, -c.label))
            logger.info(
                "image %d prompt %d: selected region %d (score %.4f) from %d candidates",
                image_id,
                prompt.source_id,
                best.label,
                best.score,
                len(found),
            )
            mask = best.mask
        else:
            logger.warning(
                "image %d prompt %d: no region matches, emitting an empty mask",
                image_id,
                prompt.source_id,
            )
            mask = np.zeros(image.shape, dtype=bool)
        records.append(
            MaskRecord(
                image_id=image_id,
                prompt_source_id=prompt.source_id,
                category_id=prompt.category_id,
                segmentation=encode_mask(mask),
            )
        )
    return records


# ---------------------------------------------------------------------------
# everything mode


def everything_image(
    image: np.ndarray,
    checkpoint: SegmenterCheckpoint,
    image_id: int,
    seed: int,
    confidence_floor: float,
) -> tuple[list[DetectionRecord], list[MaskRecord]]:
    """Prompt-free baseline: every region becomes a mask.

    Categories are drawn from a generator seeded with (seed, image_id), so
    the assignment for one image never depends on which other images are in
    the run. Mask index within the image doubles as the prompt source id,
    and the paired detections are written in the same order so downstream
    joins line up.
    """
    rmap = extract_regions(
        image, checkpoint.binarize, checkpoint.min_area_px, checkpoint.connectivity
    )
    kept = []
    for region in rmap.regions:
        score = rmap.confidence(
            region, checkpoint.contrast_gain, checkpoint.size_margin_areas, checkpoint.min_area_px
        )
        if score >= confidence_floor:
            kept.append((region, score))
    rng = np.random.default_rng([seed, image_id])
    categories = rng.integers(1, 3, size=len(kept))
    detections, masks = [], []
    for index, ((region, score), category_id) in enumerate(zip(kept, categories)):
        detections.append(
            DetectionRecord(
                image_id=image_id,
                category_id=int(category_id),
                bbox=region.box_xywh,
                score=score,
            )
        )
        masks.append(
            MaskRecord(
                image_id=image_id,
                prompt_source_id=index,
                category_id=int(category_id),
                segmentation=encode_mask(rmap.mask_of(region.label)),
            )
        )
    return detections, masks
