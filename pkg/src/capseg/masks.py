"""Pixel-grid geometry: binary masks, run-length encoding, boxes, centroids, IoU.

Coordinate convention
---------------------
A pixel with integer coordinates ``(x, y)`` occupies the half-open unit
square ``[x, x+1) x [y, y+1)``; ``x`` indexes columns and ``y`` indexes
rows, so a mask array is addressed ``mask[y, x]``. Bounding boxes are
expressed in pixel-edge coordinates, which makes tight boxes and centroid
arithmetic exact. Boxes treat all four boundaries as inclusive for point
containment.

Masks are 2D boolean numpy arrays of shape ``(height, width)``. Run-length
encoding is column-major and starts with a (possibly zero-length)
background run, matching the common uncompressed interchange layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundingBox",
    "Point2",
    "RleMask",
    "mask_iou",
    "mask_area_px",
    "mask_tight_box",
    "box_iou",
    "box_to_mask",
    "rle_encode",
    "rle_decode",
    "rle_area",
    "rle_iou",
]


@dataclass(frozen=True)
class Point2:
    """A point in pixel-edge coordinates."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel-edge coordinates, corners (x_min, y_min) and (x_max, y_max)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"degenerate box: [{self.x_min}, {self.y_min}, {self.x_max}, {self.y_max}]"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def centroid(self) -> Point2:
        """Center of the box: ((x_min+x_max)/2, (y_min+y_max)/2)."""
        return Point2((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def contains(self, p: Point2) -> bool:
        """True iff the point lies inside the box, boundaries inclusive on all four edges."""
        return self.x_min <= p.x <= self.x_max and self.y_min <= p.y <= self.y_max

    def shifted(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def clamped(self, width: int, height: int) -> "BoundingBox":
        """Clamp the box into image bounds [0, width] x [0, height]."""
        return BoundingBox(
            min(max(self.x_min, 0.0), width - 1.0),
            min(max(self.y_min, 0.0), height - 1.0),
            max(min(self.x_max, float(width)), 1.0),
            max(min(self.y_max, float(height)), 1.0),
        )

    def as_xyxy(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class RleMask:
    """Run-length encoded binary mask.

    ``counts`` alternates background/foreground run lengths over the mask
    flattened column-major (down each column, then to the next column),
    always starting with a background run, which may be zero.
    """

    width: int
    height: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"invalid RLE dimensions {self.width}x{self.height}")
        if any(c < 0 for c in self.counts):
            raise ValueError("RLE counts must be non-negative")
        total = sum(self.counts)
        if total != self.width * self.height:
            raise ValueError(
                f"RLE counts sum to {total}, expected width*height = {self.width * self.height}"
            )


def _as_mask(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2D, got shape {m.shape}")
    return m.astype(bool, copy=False)


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two binary masks of equal shape.

    Parameters
    ----------
    a, b : ndarray of bool, shape (H, W)

    Returns
    -------
    float in [0, 1]

    Raises
    ------
    ValueError
        If shapes differ, or if both masks are empty (the ratio is
        undefined and silently scoring it would hide upstream bugs).
    """
    a = _as_mask(a)
    b = _as_mask(b)
    if a.shape != b.shape:
        raise ValueError(f"mask shape mismatch: {a.shape} vs {b.shape}")
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a)) + int(np.count_nonzero(b)) - inter
    if union == 0:
        raise ValueError("IoU of two empty masks is undefined")
    return inter / union


def mask_area_px(m: np.ndarray) -> int:
    """Number of set pixels."""
    return int(np.count_nonzero(_as_mask(m)))


def mask_tight_box(m: np.ndarray) -> BoundingBox:
    """Minimal axis-aligned box containing all set pixels, in pixel-edge coordinates.

    A single set pixel at ``(x, y)`` yields ``[x, y, x+1, y+1]``.

    Raises
    ------
    ValueError
        If the mask is empty.
    """
    m = _as_mask(m)
    rows = np.flatnonzero(m.any(axis=1))
    cols = np.flatnonzero(m.any(axis=0))
    if rows.size == 0:
        raise ValueError("tight box of an empty mask is undefined")
    return BoundingBox(
        float(cols[0]), float(rows[0]), float(cols[-1] + 1), float(rows[-1] + 1)
    )


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """IoU of two boxes on real coordinates (0.0 when disjoint)."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def box_to_mask(box: BoundingBox, width: int, height: int) -> np.ndarray:
    """Rasterize a box to a mask: a pixel is inside iff its center lies in the box.

    For integer-edge boxes this selects exactly the columns
    ``x_min .. x_max-1`` and rows ``y_min .. y_max-1``.
    """
    out = np.zeros((height, width), dtype=bool)
    x0 = max(int(np.ceil(box.x_min - 0.5)), 0)
    x1 = min(int(np.floor(box.x_max - 0.5)), width - 1)
    y0 = max(int(np.ceil(box.y_min - 0.5)), 0)
    y1 = min(int(np.floor(box.y_max - 0.5)), height - 1)
    if x0 <= x1 and y0 <= y1:
        out[y0 : y1 + 1, x0 : x1 + 1] = True
    return out


def rle_encode(m: np.ndarray) -> RleMask:
    """Encode a binary mask as column-major run lengths starting with background."""
    m = _as_mask(m)
    height, width = m.shape
    flat = m.flatten(order="F")
    if flat.size == 0:
        raise ValueError("cannot encode an empty-shape mask")
    boundaries = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], boundaries, [flat.size]))
    counts = np.diff(edges).tolist()
    if flat[0]:
        counts = [0] + counts
    return RleMask(width=width, height=height, counts=tuple(int(c) for c in counts))


def rle_decode(r: RleMask) -> np.ndarray:
    """Decode run lengths back to a boolean mask. Lossless inverse of rle_encode."""
    values = np.zeros(len(r.counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, np.asarray(r.counts, dtype=np.int64))
    return flat.reshape((r.height, r.width), order="F")


def _foreground_intervals(r: RleMask) -> np.ndarray:
    """Foreground runs as an (n, 2) array of [start, end) offsets into the flat mask."""
    edges = np.concatenate(([0], np.cumsum(np.asarray(r.counts, dtype=np.int64))))
    starts = edges[1:-1:2] if len(r.counts) > 1 else np.empty(0, dtype=np.int64)
    ends = edges[2::2]
    return np.stack([starts, ends], axis=1) if starts.size else np.empty((0, 2), dtype=np.int64)


def rle_area(r: RleMask) -> int:
    """Foreground pixel count, computed on runs without decoding."""
    return int(sum(r.counts[1::2]))


def rle_iou(a: RleMask, b: RleMask) -> float:
    """IoU computed directly on run-length intervals, without decoding.

    Agrees exactly with ``mask_iou`` on the decoded masks; kept as an
    independent computation route for cross-checking.
    """
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(
            f"RLE dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    ia = _foreground_intervals(a)
    ib = _foreground_intervals(b)
    inter = 0
    i = j = 0
    while i < len(ia) and j < len(ib):
        lo = max(ia[i, 0], ib[j, 0])
        hi = min(ia[i, 1], ib[j, 1])
        if hi > lo:
            inter += int(hi - lo)
        if ia[i, 1] <= ib[j, 1]:
            i += 1
        else:
            j += 1
    union = rle_area(a) + rle_area(b) - inter
    if union == 0:
        raise ValueError("IoU of two empty masks is undefined")
    return inter / union
