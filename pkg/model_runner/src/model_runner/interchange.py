"""File interchange with the core pipeline, plus the pre-exit self-check.

The runner talks to the core exclusively through three documented files:

* ``prompts.json`` (read): object keyed by image id, each an array of
  {box, points, category, source_id}. Boxes are ``[x_min, y_min, x_max,
  y_max]`` or null; points are ``[x, y, label]`` rows with label 1 for the
  target instance and 0 for an intruder.
* ``detections.json`` (written): ``{"detections": [...]}`` with flat records
  {image_id, category_id, bbox as [x, y, w, h], score}. Within an image the
  array order is the record identity downstream, so writers must keep it
  stable.
* ``masks.json`` (written): ``{"masks": [...]}`` with records {image_id,
  prompt_source_id, category_id, segmentation}, segmentation being
  column-major run lengths starting with a background run.

JSON output uses two-space indentation and a trailing newline so equal data
give equal bytes. ``self_check_detections`` and ``self_check_masks`` re-read
a file this process just wrote and re-validate it from the bytes up; every
write goes through them before the process exits, so a malformed artifact
can never be handed to the core.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "SchemaError",
    "PromptRecord",
    "DetectionRecord",
    "MaskRecord",
    "encode_mask",
    "decode_mask",
    "read_prompts",
    "write_detections",
    "write_masks",
    "self_check_detections",
    "self_check_masks",
]

_CATEGORY_IDS = {"CM": 1, "CAP": 2}


class SchemaError(ValueError):
    """An interchange file violated its schema; the message names the spot."""


@dataclass(frozen=True)
class PromptRecord:
    """One prompt: optional box, labelled points, category, source id."""

    box: tuple[float, float, float, float] | None
    points: tuple[tuple[float, float, int], ...]
    category_id: int
    source_id: int


@dataclass(frozen=True)
class DetectionRecord:
    """One detection destined for detections.json."""

    image_id: int
    category_id: int
    bbox: tuple[float, float, float, float]
    score: float


@dataclass(frozen=True)
class MaskRecord:
    """One mask destined for masks.json."""

    image_id: int
    prompt_source_id: int
    category_id: int
    segmentation: dict = field(hash=False)


# ---------------------------------------------------------------------------
# run-length coding


def encode_mask(mask: np.ndarray) -> dict:
    """Column-major run lengths starting with background, as a JSON object."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"expected a non-empty 2D mask, got shape {m.shape}")
    flat = m.flatten(order="F")
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], changes, [flat.size]))
    counts = np.diff(edges).tolist()
    if flat[0]:
        counts = [0] + counts
    return {"size": [int(m.shape[0]), int(m.shape[1])], "counts": [int(c) for c in counts]}


def decode_mask(segmentation: Mapping) -> np.ndarray:
    """Inverse of :func:`encode_mask`."""
    height, width = (int(v) for v in segmentation["size"])
    counts = np.asarray(segmentation["counts"], dtype=np.int64)
    values = np.zeros(len(counts), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return flat.reshape((height, width), order="F")


# ---------------------------------------------------------------------------
# reading prompts


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _parse_prompt(rec, where: str) -> PromptRecord:
    if not isinstance(rec, dict):
        raise SchemaError(f"{where}: expected an object")
    box = rec.get("box")
    if box is not None:
        if not isinstance(box, list) or len(box) != 4:
            raise SchemaError(f"{where}.box: expected [x_min, y_min, x_max, y_max] or null")
        x0, y0, x1, y1 = (_as_number(v, f"{where}.box") for v in box)
        if x1 <= x0 or y1 <= y0:
            raise SchemaError(f"{where}.box: must have positive extent")
        box = (x0, y0, x1, y1)
    points = rec.get("points")
    if not isinstance(points, list):
        raise SchemaError(f"{where}.points: expected a list")
    parsed = []
    for j, row in enumerate(points):
        if not isinstance(row, list) or len(row) != 3:
            raise SchemaError(f"{where}.points[{j}]: expected [x, y, label]")
        x = _as_number(row[0], f"{where}.points[{j}]")
        y = _as_number(row[1], f"{where}.points[{j}]")
        label = row[2]
        if label not in (0, 1) or isinstance(label, bool):
            raise SchemaError(f"{where}.points[{j}]: label must be 0 or 1, got {label!r}")
        parsed.append((x, y, int(label)))
    category = rec.get("category")
    if category not in _CATEGORY_IDS:
        raise SchemaError(f"{where}.category: expected 'CM' or 'CAP', got {category!r}")
    source_id = rec.get("source_id")
    if not isinstance(source_id, int) or isinstance(source_id, bool) or source_id < 0:
        raise SchemaError(f"{where}.source_id: expected a non-negative integer")
    if box is None and not any(label == 1 for _, _, label in parsed):
        raise SchemaError(f"{where}: prompt has neither a box nor a positive point")
    return PromptRecord(
        box=box, points=tuple(parsed), category_id=_CATEGORY_IDS[category], source_id=source_id
    )


def read_prompts(path: str | Path) -> dict[int, list[PromptRecord]]:
    """Parse prompts.json into records grouped by image id."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: expected an object keyed by image id")
    out: dict[int, list[PromptRecord]] = {}
    for key, entries in raw.items():
        try:
            image_id = int(key)
        except ValueError:
            raise SchemaError(f"{path}: key {key!r} is not an image id") from None
        if not isinstance(entries, list):
            raise SchemaError(f"{path}: image {key}: expected an array of prompts")
        parsed = [
            _parse_prompt(rec, f"image {key} prompt [{i}]") for i, rec in enumerate(entries)
        ]
        seen = [p.source_id for p in parsed]
        if len(set(seen)) != len(seen):
            raise SchemaError(f"{path}: image {key}: duplicate source_id in prompts")
        out[image_id] = parsed
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# writing detections and masks


def _dump(obj, path: str | Path) -> None:
    text = json.dumps(obj, indent=2, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_detections(records: Mapping[int, Sequence[DetectionRecord]], path: str | Path) -> None:
    """Write detections.json, images sorted, per-image order preserved."""
    rows = []
    for image_id in sorted(records):
        for rec in records[image_id]:
            rows.append(
                {
                    "image_id": rec.image_id,
                    "category_id": rec.category_id,
                    "bbox": [float(v) for v in rec.bbox],
                    "score": float(rec.score),
                }
            )
    _dump({"detections": rows}, path)


def write_masks(records: Sequence[MaskRecord], path: str | Path) -> None:
    """Write masks.json sorted by (image_id, prompt_source_id)."""
    ordered = sorted(records, key=lambda r: (r.image_id, r.prompt_source_id))
    _dump(
        {
            "masks": [
                {
                    "image_id": r.image_id,
                    "prompt_source_id": r.prompt_source_id,
                    "category_id": r.category_id,
                    "segmentation": r.segmentation,
                }
                for r in ordered
            ]
        },
        path,
    )


# ---------------------------------------------------------------------------
# self-check: re-read what was written and validate from the bytes up


def _load_list(path: str | Path, key: str) -> list:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"self-check {path}: cannot re-read: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get(key), list):
        raise SchemaError(f"self-check {path}: expected an object with a '{key}' list")
    return raw[key]


def _check_int(rec, where: str, key: str) -> int:
    value = rec.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise SchemaError(f"{where}.{key}: expected an integer, got {value!r}")
    return value


def self_check_detections(path: str | Path) -> int:
    """Validate a written detections.json; returns the record count."""
    rows = _load_list(path, "detections")
    for i, rec in enumerate(rows):
        where = f"self-check {path}: detections[{i}]"
        if not isinstance(rec, dict) or set(rec) != {"image_id", "category_id", "bbox", "score"}:
            raise SchemaError(f"{where}: wrong field set")
        _check_int(rec, where, "image_id")
        if _check_int(rec, where, "category_id") not in (1, 2):
            raise SchemaError(f"{where}.category_id: must be 1 or 2")
        bbox = rec["bbox"]
        if (
            not isinstance(bbox, list)
            or len(bbox) != 4
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in bbox)
            or bbox[2] <= 0
            or bbox[3] <= 0
        ):
            raise SchemaError(f"{where}.bbox: expected [x, y, w, h] with positive size")
        score = rec["score"]
        if isinstance(score, bool) or not isinstance(score, (int, float)) or not 0 <= score <= 1:
            raise SchemaError(f"{where}.score: must be a number in [0, 1]")
    return len(rows)


def self_check_masks(path: str | Path, dims_by_image: Mapping[int, tuple[int, int]]) -> int:
    """Validate a written masks.json against known image dimensions.

    Checks the field set, run-length arithmetic (non-negative counts summing
    to height*width), dimension agreement with the image each mask belongs
    to, and one-mask-per-prompt uniqueness of (image_id, prompt_source_id).
    Returns the record count.
    """
    rows = _load_list(path, "masks")
    seen: set[tuple[int, int]] = set()
    for i, rec in enumerate(rows):
        where = f"self-check {path}: masks[{i}]"
        expected = {"image_id", "prompt_source_id", "category_id", "segmentation"}
        if not isinstance(rec, dict) or set(rec) != expected:
            raise SchemaError(f"{where}: wrong field set")
        image_id = _check_int(rec, where, "image_id")
        source_id = _check_int(rec, where, "prompt_source_id")
        if _check_int(rec, where, "category_id") not in (1, 2):
            raise SchemaError(f"{where}.category_id: must be 1 or 2")
        seg = rec["segmentation"]
        if not isinstance(seg, dict) or set(seg) != {"size", "counts"}:
            raise SchemaError(f"{where}.segmentation: expected size and counts")
        size = seg["size"]
        if not isinstance(size, list) or len(size) != 2:
            raise SchemaError(f"{where}.segmentation.size: expected [height, width]")
        counts = seg["counts"]
        if not isinstance(counts, list) or not counts:
            raise SchemaError(f"{where}.segmentation.counts: expected a non-empty list")
        if any(not isinstance(c, int) or isinstance(c, bool) or c < 0 for c in counts):
            raise SchemaError(f"{where}.segmentation.counts: all runs must be ints >= 0")
        height, width = size
        if sum(counts) != height * width:
            raise SchemaError(
                f"{where}.segmentation: counts sum {sum(counts)} != {height}*{width}"
            )
        if image_id not in dims_by_image:
            raise SchemaError(f"{where}: unknown image id {image_id}")
        if (height, width) != dims_by_image[image_id]:
            raise SchemaError(
                f"{where}: size {(height, width)} does not match image "
                f"{dims_by_image[image_id]}"
            )
        key = (image_id, source_id)
        if key in seen:
            raise SchemaError(f"{where}: duplicate mask for image {image_id} prompt {source_id}")
        seen.add(key)
    return len(rows)
