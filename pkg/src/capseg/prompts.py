"""Prompt generation for a promptable segmenter from detector output.

Each detected object becomes one prompt. A prompt pairs the detection's
bounding box (a coarse constraint on the mask extent) with a set of
binary-labeled points (a fine constraint): the centroid of the target's
own box labeled 1, plus the centroid of every other detected object whose
centroid falls inside the target's box, labeled 0. The negative points
tell the segmenter which neighboring objects to exclude when boxes
overlap heavily, which is the norm for densely packed cells.

Three prompt modes cover the ablation axes: points only, box only, and
box plus points. Generation is at most O(n^2) in the number of
detections per image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .instances import Category
from .masks import BoundingBox, Point2

__all__ = [
    "Detection",
    "LabeledPoint",
    "Prompt",
    "PromptMode",
    "PromptStats",
    "generate_prompts",
    "prompt_stats",
]


class PromptMode(Enum):
    """Which prompt ingredients are emitted."""

    POINTS_ONLY = "points_only"
    BOX_ONLY = "box_only"
    BOX_AND_POINTS = "box_and_points"


@dataclass(frozen=True)
class Detection:
    """Detector output for one object: box, category, confidence, per-image id."""

    box: BoundingBox
    category: Category
    confidence: float
    id: int

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class LabeledPoint:
    """A point with a binary label: 1 marks the target object, 0 an intruder."""

    point: Point2
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"point label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class Prompt:
    """Input steering the segmenter toward one object.

    Depending on the mode, ``box`` may be absent (points-only) or
    ``points`` may be empty (box-only). In point-bearing modes there is
    exactly one positive point, the centroid of the target's own box, and
    every point lies within the box boundaries (inclusive).
    """

    box: BoundingBox | None
    points: tuple[LabeledPoint, ...]
    category: Category
    source_id: int

    def positive_point(self) -> Point2 | None:
        for lp in self.points:
            if lp.label == 1:
                return lp.point
        return None

    def negative_count(self) -> int:
        return sum(1 for lp in self.points if lp.label == 0)


def generate_prompts(
    detections: list[Detection], mode: PromptMode = PromptMode.BOX_AND_POINTS
) -> list[Prompt]:
    """Build one prompt per detection.

    For detection i, the point set holds the centroid of every detection j
    whose centroid lies inside box i (boundaries inclusive), labeled 1 for
    j == i and 0 otherwise. A box always contains its own centroid, so the
    positive point is always present. Points are ordered by source
    detection index; prompts preserve detection order.

    Parameters
    ----------
    detections : list of Detection
        Detector output for one image. Order is preserved. An empty list
        yields an empty prompt list.
    mode : PromptMode
        Which of box / points to emit.

    Raises
    ------
    ValueError
        If detection ids are not unique within the image.
    """
    if not detections:
        return []
    ids = [d.id for d in detections]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"duplicate detection ids {dupes}")

    n = len(detections)
    centroids = [d.box.centroid() for d in detections]
    cx = np.array([p.x for p in centroids])
    cy = np.array([p.y for p in centroids])
    x_min = np.array([d.box.x_min for d in detections])
    x_max = np.array([d.box.x_max for d in detections])
    y_min = np.array([d.box.y_min for d in detections])
    y_max = np.array([d.box.y_max for d in detections])

    # contains[i, j]: centroid of detection j lies inside box of detection i
    contains = (
        (cx[None, :] >= x_min[:, None])
        & (cx[None, :] <= x_max[:, None])
        & (cy[None, :] >= y_min[:, None])
        & (cy[None, :] <= y_max[:, None])
    )

    prompts = []
    for i, det in enumerate(detections):
        if mode is PromptMode.BOX_ONLY:
            points: tuple[LabeledPoint, ...] = ()
        else:
            points = tuple(
                LabeledPoint(point=centroids[j], label=int(j == i))
                for j in range(n)
                if contains[i, j]
            )
        prompts.append(
            Prompt(
                box=None if mode is PromptMode.POINTS_ONLY else det.box,
                points=points,
                category=det.category,
                source_id=det.id,
            )
        )
    return prompts


@dataclass(frozen=True)
class PromptStats:
    """Summary of how crowded a prompt set is with negative points."""

    n_prompts: int
    negatives_per_prompt: tuple[int, ...]
    fraction_with_negative: float
    mean_negatives: float


def prompt_stats(prompts: list[Prompt]) -> PromptStats:
    """Count negative points per prompt and the fraction of prompts with any.

    Quantifies how pathological the box overlaps are in a scene: a high
    fraction means most prompts needed exclusion points.
    """
    negs = tuple(p.negative_count() for p in prompts)
    n = len(prompts)
    with_neg = sum(1 for c in negs if c > 0)
    return PromptStats(
        n_prompts=n,
        negatives_per_prompt=negs,
        fraction_with_negative=(with_neg / n) if n else 0.0,
        mean_negatives=(sum(negs) / n) if n else 0.0,
    )
