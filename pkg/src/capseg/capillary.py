"""Capillarization measurements over segmented instances.

All areas are physical (square micrometers), derived from a field-of-view
calibration that ties pixel counts to tissue dimensions. Seven values are
measured per image:

* ``cm_count`` / ``cap_count``: instances per category
* ``cm_area_um2`` / ``cap_area_um2``: summed instance area
* ``cdfa``: capillaries per square micrometer of field of view
* ``cdca``: capillaries per square micrometer of muscle-cell area
* ``ccr``: capillaries per muscle cell

Ratios with a zero denominator are ``None`` rather than a crash or a
sentinel number; assessment and aggregation carry the ``None`` through
and report how many inputs were excluded because of it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .instances import Category, InstanceMask

__all__ = [
    "METRIC_FIELDS",
    "AreaMode",
    "ErrorAggregation",
    "FovSpec",
    "Measurements",
    "ErrorSummary",
    "measure",
    "assess",
    "aggregate_errors",
]

# Canonical metric order, used for reports and CSV columns.
METRIC_FIELDS = (
    "cm_count",
    "cap_count",
    "cm_area_um2",
    "cap_area_um2",
    "cdfa",
    "cdca",
    "ccr",
)


class AreaMode(Enum):
    # sum of per-instance areas; overlapping predictions count twice
    PER_INSTANCE = "per_instance"
    # area of the union of the category's masks
    UNION = "union"


class ErrorAggregation(Enum):
    MEAN_ABS = "mean_abs"
    MEAN_SIGNED = "mean_signed"


@dataclass(frozen=True)
class FovSpec:
    """Physical calibration of one imaged field of view.

    Pixels must be square: the horizontal and vertical micrometers per
    pixel have to agree to within 1e-9.
    """

    width_um: float
    height_um: float
    width_px: int
    height_px: int

    def __post_init__(self):
        for name in ("width_um", "height_um", "width_px", "height_px"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        sx = self.width_um / self.width_px
        sy = self.height_um / self.height_px
        if not math.isclose(sx, sy, rel_tol=0.0, abs_tol=1e-9):
            raise ValueError(f"pixels are not square: {sx} um/px horizontal vs {sy} vertical")

    @property
    def pixel_size_um(self) -> float:
        return self.width_um / self.width_px

    @property
    def pixel_area_um2(self) -> float:
        return self.pixel_size_um**2

    @property
    def area_um2(self) -> float:
        return self.width_um * self.height_um


@dataclass(frozen=True)
class Measurements:
    """Per-image capillarization values; ratios are properties so they
    can never disagree with the counts and areas they derive from."""

    cm_count: int
    cap_count: int
    cm_area_um2: float
    cap_area_um2: float
    fov_area_um2: float

    @property
    def cdfa(self) -> float:
        return self.cap_count / self.fov_area_um2

    @property
    def cdca(self) -> float | None:
        if self.cm_area_um2 == 0.0:
            return None
        return self.cap_count / self.cm_area_um2

    @property
    def ccr(self) -> float | None:
        if self.cm_count == 0:
            return None
        return self.cap_count / self.cm_count

    def as_dict(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in METRIC_FIELDS}


def measure(
    instances: Sequence[InstanceMask],
    fov: FovSpec,
    area_mode: AreaMode = AreaMode.PER_INSTANCE,
) -> Measurements:
    """Quantify capillarization from one image's instances."""
    expected = (fov.height_px, fov.width_px)
    for inst in instances:
        if inst.mask.shape != expected:
            raise ValueError(
                f"instance mask shape {inst.mask.shape} does not match field of view {expected}"
            )

    def category_pixels(cat: Category) -> int:
        masks = [inst.mask for inst in instances if inst.category is cat]
        if not masks:
            return 0
        if area_mode is AreaMode.PER_INSTANCE:
            return int(sum(int(m.sum()) for m in masks))
        return int(np.logical_or.reduce(masks).sum())

    cm_count = sum(1 for inst in instances if inst.category is Category.CM)
    cap_count = sum(1 for inst in instances if inst.category is Category.CAP)
    result = Measurements(
        cm_count=cm_count,
        cap_count=cap_count,
        cm_area_um2=category_pixels(Category.CM) * fov.pixel_area_um2,
        cap_area_um2=category_pixels(Category.CAP) * fov.pixel_area_um2,
        fov_area_um2=fov.area_um2,
    )
    undefined = [name for name in ("cdca", "ccr") if getattr(result, name) is None]
    if undefined:
        warnings.warn(
            f"undefined ratio(s) {', '.join(undefined)}: no muscle-cell denominator",
            RuntimeWarning,
        )
    return result


def assess(predicted: Measurements, truth: Measurements) -> dict[str, float | None]:
    """Relative assessment error per metric: (predicted - truth) / truth.

    A metric is ``None`` when the truth value is zero or when either side
    is itself undefined.
    """
    out: dict[str, float | None] = {}
    pred_values = predicted.as_dict()
    true_values = truth.as_dict()
    for name in METRIC_FIELDS:
        p, t = pred_values[name], true_values[name]
        if p is None or t is None or t == 0:
            out[name] = None
        else:
            out[name] = (p - t) / t
    return out


@dataclass(frozen=True)
class ErrorSummary:
    """Aggregate of one metric's assessment errors across images.

    ``sd`` is the sample standard deviation; ``None`` when fewer than two
    defined values contributed.
    """

    mean: float | None
    sd: float | None
    n_used: int
    n_excluded: int


def aggregate_errors(
    errors: Sequence[Mapping[str, float | None]],
    aggregation: ErrorAggregation = ErrorAggregation.MEAN_ABS,
) -> dict[str, ErrorSummary]:
    """Combine per-image assessment errors metric by metric.

    ``MEAN_ABS`` averages error magnitudes, ``MEAN_SIGNED`` averages raw
    errors so over- and under-estimation can cancel. Undefined entries
    are excluded and counted; a metric undefined everywhere yields an
    empty summary and a warning.
    """
    if not errors:
        raise ValueError("aggregate_errors needs at least one image's errors")
    out: dict[str, ErrorSummary] = {}
    for name in METRIC_FIELDS:
        values = [e.get(name) for e in errors]
        used = [v for v in values if v is not None]
        if aggregation is ErrorAggregation.MEAN_ABS:
            used = [abs(v) for v in used]
        if not used:
            warnings.warn(f"metric {name}: undefined for every image", RuntimeWarning)
            out[name] = ErrorSummary(mean=None, sd=None, n_used=0, n_excluded=len(values))
            continue
        mean = sum(used) / len(used)
        sd = None
        if len(used) >= 2:
            sd = math.sqrt(sum((v - mean) ** 2 for v in used) / (len(used) - 1))
        out[name] = ErrorSummary(
            mean=mean, sd=sd, n_used=len(used), n_excluded=len(values) - len(used)
        )
    return out
