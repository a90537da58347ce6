"""Classical region extraction shared by the detector and the segmenter.

Both reference backends see an image the same way: binarize it into
foreground objects and background, take connected components, and keep
every component at least ``min_area_px`` pixels large. What differs is what
happens next (category assignment versus prompt-guided selection), so that
lives in the callers.

Connectivity is a checkpoint weight because it decides what a membrane can
separate: under 4-connectivity a closed one-pixel ring splits inside from
outside, under 8-connectivity the two still touch diagonally through the
ring's corners. Stains that outline small vessels with thin rims need 4.

Confidence is a contrast statistic rather than a learned logit: how far a
region's mean level sits from the background mean, normalised by the image's
level span, damped for regions near the minimum area. It is monotone in the
visual evidence, lands in [0, 1], and is deterministic, which is what the
downstream ranking needs from a score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .checkpoints import BinarizeSpec

__all__ = ["Region", "RegionMap", "otsu_threshold", "binarize", "extract_regions"]

_STRUCTURES = {
    4: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    8: np.ones((3, 3), dtype=bool),
}


@dataclass(frozen=True)
class Region:
    """One foreground component: id, size, tight box, and mean level."""

    label: int
    area_px: int
    box_xywh: tuple[float, float, float, float]
    mean_level: float


@dataclass(frozen=True)
class RegionMap:
    """Labelled foreground of one image plus per-region statistics."""

    labels: np.ndarray
    regions: tuple[Region, ...]
    background_mean: float
    level_span: float

    def mask_of(self, label: int) -> np.ndarray:
        return self.labels == label

    def label_at(self, x: float, y: float) -> int:
        """Region label under a continuous (x, y) point, 0 for background."""
        h, w = self.labels.shape
        row = min(max(int(np.floor(y)), 0), h - 1)
        col = min(max(int(np.floor(x)), 0), w - 1)
        return int(self.labels[row, col])

    def confidence(self, region: Region, gain: float, margin_areas: float, min_area: int) -> float:
        contrast = gain * abs(self.background_mean - region.mean_level) / self.level_span
        damp = min(1.0, region.area_px / (margin_areas * min_area))
        return float(min(max(contrast * damp, 0.0), 1.0))


def otsu_threshold(image: np.ndarray) -> int | None:
    """Histogram threshold maximising between-class variance; None if flat."""
    hist = np.bincount(image.ravel(), minlength=65536).astype(np.float64)
    total = hist.sum()
    levels = np.arange(hist.size, dtype=np.float64)
    w0 = np.cumsum(hist)
    w1 = total - w0
    moment = np.cumsum(hist * levels)
    valid = (w0 > 0) & (w1 > 0)
    if not valid.any():
        return None
    mu0 = np.divide(moment, w0, out=np.zeros_like(moment), where=valid)
    mu1 = np.divide(moment[-1] - moment, w1, out=np.zeros_like(moment), where=valid)
    between = np.where(valid, w0 * w1 * (mu0 - mu1) ** 2, -1.0)
    return int(between.argmax())


def binarize(image: np.ndarray, spec: BinarizeSpec) -> np.ndarray:
    """Foreground mask under the checkpoint's thresholding rule."""
    if spec.method == "otsu":
        threshold = otsu_threshold(image)
        if threshold is None:
            return np.zeros(image.shape, dtype=bool)
    else:
        threshold = spec.threshold
    if spec.polarity == "dark_objects":
        return image <= threshold
    return image > threshold


def extract_regions(
    image: np.ndarray, spec: BinarizeSpec, min_area_px: int, connectivity: int = 4
) -> RegionMap:
    """Binarize and label one image, dropping regions below the area floor.

    Region order follows the raster position of each component's first
    pixel, so identical pixels always produce identical region lists.
    """
    fg = binarize(image, spec)
    labels, count = ndimage.label(fg, structure=_STRUCTURES[connectivity])
    regions = []
    if count:
        areas = np.bincount(labels.ravel(), minlength=count + 1)
        means = ndimage.mean(image, labels=labels, index=np.arange(1, count + 1))
        for label, location in enumerate(ndimage.find_objects(labels), start=1):
            area = int(areas[label])
            if location is None or area < min_area_px:
                continue
            rows, cols = location
            regions.append(
                Region(
                    label=label,
                    area_px=area,
                    box_xywh=(
                        float(cols.start),
                        float(rows.start),
                        float(cols.stop - cols.start),
                        float(rows.stop - rows.start),
                    ),
                    mean_level=float(means[label - 1]),
                )
            )
    background = image[~fg]
    background_mean = float(background.mean()) if background.size else 0.0
    span = float(int(image.max()) - int(image.min()))
    return RegionMap(
        labels=labels,
        regions=tuple(regions),
        background_mean=background_mean,
        level_span=max(span, 1.0),
    )
