"""Instance-segmentation metrics: greedy matching, AP/AR/F1 at IoU thresholds.

Two averaging modes are provided because they answer different questions
and can diverge substantially on small images:

* ``EvalMode.PER_IMAGE``: precision and recall are formed per image and
  per category from raw TP/FP/FN counts, then averaged over categories,
  then over images, then over thresholds. Every image contributes
  equally regardless of how many instances it holds.
* ``EvalMode.POOLED``: detections are pooled across the dataset per
  category and ranked by confidence; average precision is the COCO-style
  101-point interpolated area under the precision/recall curve, and
  average recall is the recall at the end of the ranking.

Both modes share one matching rule, applied independently at each
threshold: within a category, predictions are visited in descending
confidence order and greedily claim the unmatched ground-truth instance
with the highest IoU at or above the threshold.

The threshold grid is built from integer ratios, ``(50 + 5*k) / 100``,
so a mask pair whose IoU is an exact binary ratio like 300/500 compares
against the 0.60 threshold without floating-point surprises.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .instances import Category, InstanceMask

__all__ = [
    "EvalMode",
    "MatchedPair",
    "CategoryMatch",
    "EvalReport",
    "iou_thresholds",
    "f1_from",
    "match_instances",
    "cross_category_hits",
    "evaluate",
]

# Above this pixel count float32 dot products could round intersection
# counts; float64 stays exact to 2**53 pixels.
_EXACT_F32_PIXELS = 1 << 24


class EvalMode(Enum):
    PER_IMAGE = "per_image"
    POOLED = "pooled"


def iou_thresholds() -> tuple[float, ...]:
    """The standard grid 0.50, 0.55, ... 0.95 as exact integer ratios."""
    return tuple((50 + 5 * k) / 100 for k in range(10))


def f1_from(map_value: float, mar_value: float) -> float:
    """Harmonic mean of mean average precision and mean average recall."""
    total = map_value + mar_value
    if total == 0.0:
        return 0.0
    return 2.0 * map_value * mar_value / total


@dataclass(frozen=True)
class MatchedPair:
    pred_id: int
    truth_id: int
    iou: float


@dataclass(frozen=True)
class CategoryMatch:
    """Matching outcome for one category of one image at one threshold."""

    category: Category
    threshold: float
    n_truth: int
    n_pred: int
    pairs: tuple[MatchedPair, ...]

    @property
    def true_positives(self) -> int:
        return len(self.pairs)

    @property
    def false_positives(self) -> int:
        return self.n_pred - len(self.pairs)

    @property
    def false_negatives(self) -> int:
        return self.n_truth - len(self.pairs)


def _stacked(masks: Sequence[np.ndarray], dtype) -> np.ndarray:
    return np.stack([np.asarray(m).reshape(-1) for m in masks]).astype(dtype)


def pairwise_mask_iou(
    a_masks: Sequence[np.ndarray], b_masks: Sequence[np.ndarray]
) -> np.ndarray:
    """IoU matrix of shape [len(a), len(b)] via one matrix product.

    Pixel counts are accumulated in float32 when the image is small
    enough that every partial sum is exactly representable, otherwise in
    float64; the final division always happens in float64.
    """
    if not a_masks or not b_masks:
        return np.zeros((len(a_masks), len(b_masks)))
    dtype = np.float32 if a_masks[0].size < _EXACT_F32_PIXELS else np.float64
    a = _stacked(a_masks, dtype)
    b = _stacked(b_masks, dtype)
    inter = (a @ b.T).astype(np.float64)
    area_a = a.sum(axis=1).astype(np.float64)
    area_b = b.sum(axis=1).astype(np.float64)
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return iou


def _greedy_match(
    iou: np.ndarray, pred_order: Sequence[int], truth_order: Sequence[int], threshold: float
) -> list[tuple[int, int]]:
    """Greedy one-to-one assignment; returns (pred_row, truth_col) index pairs.

    Predictions are visited in ``pred_order``; each claims the unmatched
    truth with the highest IoU >= threshold. Ties go to the earliest
    entry of ``truth_order``.
    """
    taken = np.zeros(iou.shape[1], dtype=bool)
    pairs = []
    for p in pred_order:
        best_t, best_iou = -1, -1.0
        for t in truth_order:
            if taken[t]:
                continue
            v = iou[p, t]
            if v >= threshold and v > best_iou:
                best_t, best_iou = t, v
        if best_t >= 0:
            taken[best_t] = True
            pairs.append((p, best_t))
    return pairs


def _pred_order(preds: Sequence[InstanceMask]) -> list[int]:
    return sorted(range(len(preds)), key=lambda i: (-preds[i].score, preds[i].id, i))


def _truth_order(truths: Sequence[InstanceMask]) -> list[int]:
    return sorted(range(len(truths)), key=lambda i: (truths[i].id, i))


def _check_shapes(instances: Sequence[InstanceMask]) -> None:
    shapes = {inst.mask.shape for inst in instances}
    if len(shapes) > 1:
        raise ValueError(f"masks within one image must share a shape, got {sorted(shapes)}")


def match_instances(
    truths: Sequence[InstanceMask],
    preds: Sequence[InstanceMask],
    threshold: float,
) -> dict[Category, CategoryMatch]:
    """Match predictions to ground truth within each category of one image."""
    _check_shapes(list(truths) + list(preds))
    out: dict[Category, CategoryMatch] = {}
    categories = sorted(
        {t.category for t in truths} | {p.category for p in preds}, key=lambda c: c.value
    )
    for cat in categories:
        cat_truths = [t for t in truths if t.category is cat]
        cat_preds = [p for p in preds if p.category is cat]
        iou = pairwise_mask_iou([p.mask for p in cat_preds], [t.mask for t in cat_truths])
        raw = _greedy_match(iou, _pred_order(cat_preds), _truth_order(cat_truths), threshold)
        pairs = tuple(
            MatchedPair(pred_id=cat_preds[p].id, truth_id=cat_truths[t].id, iou=float(iou[p, t]))
            for p, t in raw
        )
        out[cat] = CategoryMatch(
            category=cat,
            threshold=threshold,
            n_truth=len(cat_truths),
            n_pred=len(cat_preds),
            pairs=pairs,
        )
    return out


def cross_category_hits(
    truths: Sequence[InstanceMask], preds: Sequence[InstanceMask], threshold: float
) -> int:
    """Diagnostic count of predictions overlapping a truth of another category.

    A prediction counts when its best IoU against ground-truth instances
    of a *different* category reaches the threshold. These never enter
    precision or recall; the count flags probable category confusion.
    """
    hits = 0
    for p in preds:
        others = [t.mask for t in truths if t.category is not p.category]
        if not others:
            continue
        iou = pairwise_mask_iou([p.mask], others)
        if iou.max() >= threshold:
            hits += 1
    return hits


@dataclass(frozen=True)
class EvalReport:
    """AP/AR per threshold plus the derived headline numbers.

    ``map_range`` / ``mar_range`` average over the full threshold grid;
    each F1 is the harmonic mean of the corresponding AP and AR.
    """

    mode: EvalMode
    thresholds: tuple[float, ...]
    map_by_threshold: tuple[float, ...]
    mar_by_threshold: tuple[float, ...]

    def _at(self, values: tuple[float, ...], threshold: float) -> float:
        try:
            return values[self.thresholds.index(threshold)]
        except ValueError:
            raise ValueError(f"threshold {threshold} not in report grid") from None

    def map_at(self, threshold: float) -> float:
        return self._at(self.map_by_threshold, threshold)

    def mar_at(self, threshold: float) -> float:
        return self._at(self.mar_by_threshold, threshold)

    def f1_at(self, threshold: float) -> float:
        return f1_from(self.map_at(threshold), self.mar_at(threshold))

    @property
    def map_range(self) -> float:
        return sum(self.map_by_threshold) / len(self.map_by_threshold)

    @property
    def mar_range(self) -> float:
        return sum(self.mar_by_threshold) / len(self.mar_by_threshold)

    @property
    def f1_range(self) -> float:
        return f1_from(self.map_range, self.mar_range)

    def as_dict(self) -> dict[str, float]:
        """Flat mapping for report serialization, keys in a stable order.

        Headline thresholds 0.5 and 0.75 are reported when the grid holds
        them, otherwise every grid threshold is; the range average is
        included whenever the grid has more than one point.
        """
        out: dict[str, float] = {"mode": self.mode.value}  # type: ignore[dict-item]
        headline = [t for t in (0.5, 0.75) if t in self.thresholds]
        for threshold in headline or self.thresholds:
            key = str(threshold)
            out[f"map@{key}"] = self.map_at(threshold)
            out[f"mar@{key}"] = self.mar_at(threshold)
            out[f"f1@{key}"] = self.f1_at(threshold)
        if len(self.thresholds) > 1:
            out["map@range"] = self.map_range
            out["mar@range"] = self.mar_range
            out["f1@range"] = self.f1_range
        return out


@dataclass(frozen=True)
class _CategorySlice:
    """Precomputed matching inputs for one (image, category) cell."""

    iou: np.ndarray
    pred_order: list[int]
    truth_order: list[int]
    scores: list[float]
    n_truth: int
    n_pred: int


def _prepare(
    truths_by_image: Mapping[int, Sequence[InstanceMask]],
    preds_by_image: Mapping[int, Sequence[InstanceMask]],
) -> dict[int, dict[Category, _CategorySlice]]:
    universe = sorted(set(truths_by_image) | set(preds_by_image))
    if not universe:
        raise ValueError("nothing to evaluate: no images given")
    prepared: dict[int, dict[Category, _CategorySlice]] = {}
    for image_id in universe:
        truths = list(truths_by_image.get(image_id, ()))
        preds = list(preds_by_image.get(image_id, ()))
        _check_shapes(truths + preds)
        cells: dict[Category, _CategorySlice] = {}
        categories = sorted(
            {t.category for t in truths} | {p.category for p in preds}, key=lambda c: c.value
        )
        for cat in categories:
            cat_truths = [t for t in truths if t.category is cat]
            cat_preds = [p for p in preds if p.category is cat]
            cells[cat] = _CategorySlice(
                iou=pairwise_mask_iou([p.mask for p in cat_preds], [t.mask for t in cat_truths]),
                pred_order=_pred_order(cat_preds),
                truth_order=_truth_order(cat_truths),
                scores=[p.score for p in cat_preds],
                n_truth=len(cat_truths),
                n_pred=len(cat_preds),
            )
        prepared[image_id] = cells
    return prepared


def _per_image_point(prepared, threshold: float) -> tuple[float, float]:
    """(mAP, mAR) at one threshold, categories -> images averaging."""
    image_aps, image_ars = [], []
    for image_id in sorted(prepared):
        cat_aps, cat_ars = [], []
        for cat in sorted(prepared[image_id], key=lambda c: c.value):
            cell = prepared[image_id][cat]
            if cell.n_truth == 0 and cell.n_pred == 0:
                continue
            if cell.n_truth == 0:
                # spurious detections only: zero precision, recall undefined
                cat_aps.append(0.0)
                continue
            if cell.n_pred == 0:
                cat_aps.append(0.0)
                cat_ars.append(0.0)
                continue
            tp = len(_greedy_match(cell.iou, cell.pred_order, cell.truth_order, threshold))
            cat_aps.append(tp / cell.n_pred)
            cat_ars.append(tp / cell.n_truth)
        if cat_aps:
            image_aps.append(sum(cat_aps) / len(cat_aps))
        if cat_ars:
            image_ars.append(sum(cat_ars) / len(cat_ars))
    if not image_aps:
        raise ValueError("no image has instances or predictions to evaluate")
    if not image_ars:
        raise ValueError("no ground-truth instances anywhere; recall is undefined")
    return sum(image_aps) / len(image_aps), sum(image_ars) / len(image_ars)


_RECALL_QUERIES = np.array([k / 100 for k in range(101)])


def _interpolated_ap(flags: list[bool], n_truth: int) -> float:
    """COCO-style 101-point interpolated average precision."""
    if not flags:
        return 0.0
    tp = np.cumsum(np.asarray(flags, dtype=np.float64))
    fp = np.cumsum(~np.asarray(flags, dtype=bool))
    recall = tp / n_truth
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, _RECALL_QUERIES, side="left")
    sampled = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
    return float(sampled.sum() / len(_RECALL_QUERIES))


def _pooled_point(prepared, threshold: float) -> tuple[float, float]:
    """(mAP, mAR) at one threshold with dataset-pooled rankings per category."""
    categories = sorted(
        {cat for cells in prepared.values() for cat in cells}, key=lambda c: c.value
    )
    cat_aps, cat_ars = [], []
    for cat in categories:
        total_truth = sum(cells[cat].n_truth for cells in prepared.values() if cat in cells)
        if total_truth == 0:
            continue
        # pool predictions across images, ranked by confidence
        pooled = []
        for image_id in sorted(prepared):
            cell = prepared[image_id].get(cat)
            if cell is None:
                continue
            for local_rank, p in enumerate(cell.pred_order):
                pooled.append((-cell.scores[p], image_id, local_rank, image_id, p))
        pooled.sort(key=lambda item: item[:3])
        taken = {image_id: np.zeros(cells[cat].n_truth, dtype=bool)
                 for image_id, cells in prepared.items() if cat in cells}
        flags = []
        for *_, image_id, p in pooled:
            cell = prepared[image_id][cat]
            best_t, best_iou = -1, -1.0
            for t in cell.truth_order:
                if taken[image_id][t]:
                    continue
                v = cell.iou[p, t]
                if v >= threshold and v > best_iou:
                    best_t, best_iou = t, v
            if best_t >= 0:
                taken[image_id][best_t] = True
                flags.append(True)
            else:
                flags.append(False)
        cat_aps.append(_interpolated_ap(flags, total_truth))
        cat_ars.append(sum(flags) / total_truth if flags else 0.0)
    if not cat_aps:
        raise ValueError("no category has ground-truth instances to evaluate")
    return sum(cat_aps) / len(cat_aps), sum(cat_ars) / len(cat_ars)


def evaluate(
    truths_by_image: Mapping[int, Sequence[InstanceMask]],
    preds_by_image: Mapping[int, Sequence[InstanceMask]],
    mode: EvalMode = EvalMode.PER_IMAGE,
    thresholds: Sequence[float] | None = None,
) -> EvalReport:
    """Score predictions against ground truth over the IoU threshold grid.

    ``truths_by_image`` and ``preds_by_image`` map image ids to instance
    lists; an id missing from one mapping means that image has no
    instances on that side. Matching at each threshold is independent.
    """
    grid = tuple(thresholds) if thresholds is not None else iou_thresholds()
    if not grid:
        raise ValueError("threshold grid is empty")
    prepared = _prepare(truths_by_image, preds_by_image)
    point = _per_image_point if mode is EvalMode.PER_IMAGE else _pooled_point
    maps, mars = [], []
    for threshold in grid:
        map_value, mar_value = point(prepared, threshold)
        maps.append(map_value)
        mars.append(mar_value)
    return EvalReport(
        mode=mode,
        thresholds=grid,
        map_by_threshold=tuple(maps),
        mar_by_threshold=tuple(mars),
    )
