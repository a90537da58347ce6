"""Instance containers shared across the pipeline stages.

An :class:`InstanceMask` is the unit of both prediction and ground truth:
one binary pixel mask with a category and a confidence score. A
:class:`LabelImage` carries dense ground truth: a per-pixel instance id
map plus an id-to-category table, from which per-instance masks, boxes
and detections are derived.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .masks import BoundingBox, mask_tight_box

__all__ = ["Category", "InstanceMask", "LabelImage"]


class Category(Enum):
    """Object category: cardiomyocyte or capillary."""

    CM = 1
    CAP = 2

    @classmethod
    def from_id(cls, category_id: int) -> "Category":
        try:
            return cls(category_id)
        except ValueError:
            raise ValueError(f"unknown category id {category_id}; expected 1 (CM) or 2 (CAP)")

    @classmethod
    def from_name(cls, name: str) -> "Category":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown category name {name!r}; expected 'CM' or 'CAP'")


@dataclass
class InstanceMask:
    """One object instance: binary mask, category, confidence, per-image id."""

    mask: np.ndarray
    category: Category
    score: float = 1.0
    id: int = 0

    def __post_init__(self):
        self.mask = np.asarray(self.mask).astype(bool, copy=False)
        if self.mask.ndim != 2:
            raise ValueError(f"instance mask must be 2D, got shape {self.mask.shape}")
        if not self.mask.any():
            raise ValueError(f"instance mask {self.id} has no set pixels")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.score}")

    @property
    def area_px(self) -> int:
        return int(np.count_nonzero(self.mask))

    def tight_box(self) -> BoundingBox:
        return mask_tight_box(self.mask)


@dataclass
class LabelImage:
    """Dense instance ground truth: per-pixel ids (0 = background) and categories.

    Every non-zero id must appear in ``categories``. Instances are expected
    to be 4-connected components, which the synthetic generator guarantees.
    """

    labels: np.ndarray
    categories: dict[int, Category] = field(default_factory=dict)

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2:
            raise ValueError(f"label image must be 2D, got shape {self.labels.shape}")
        if self.labels.dtype.kind not in "iu":
            raise ValueError(f"label image must be integer-typed, got {self.labels.dtype}")
        present = set(np.unique(self.labels).tolist()) - {0}
        missing = present - set(self.categories)
        if missing:
            raise ValueError(f"instance ids {sorted(missing)} missing from the category map")

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    def instance_ids(self) -> list[int]:
        """Non-zero instance ids present in the label map, ascending."""
        ids = np.unique(self.labels)
        return [int(i) for i in ids if i != 0]

    def instance_mask(self, instance_id: int) -> np.ndarray:
        m = self.labels == instance_id
        if not m.any():
            raise ValueError(f"instance id {instance_id} not present in label image")
        return m

    def instances(self) -> list[InstanceMask]:
        """All instances as InstanceMask objects with confidence 1.0, ordered by id."""
        return [
            InstanceMask(
                mask=self.instance_mask(i),
                category=self.categories[i],
                score=1.0,
                id=i,
            )
            for i in self.instance_ids()
        ]
