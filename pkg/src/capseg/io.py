"""Serialization for every on-disk artifact the pipeline reads or writes.

Formats (field names are part of the interface and never change):

* ``dataset.json``: images (id, file, width, height, fov_um), annotations
  (id, image_id, category_id, bbox as COCO ``[x, y, w, h]``, segmentation
  as uncompressed RLE or polygon), categories (exactly CM=1, CAP=2).
* ``detections.json``: flat records (image_id, category_id, bbox, score).
  Detection ids are not stored: within each image they are assigned
  0, 1, 2, ... in file order on load, and every other artifact refers to
  detections by that order.
* ``masks.json``: records (image_id, prompt_source_id, category_id,
  segmentation as RLE).
* ``prompts.json``: object keyed by image id, each an array of
  {box, points, category, source_id}.
* ``report.csv`` / ``errors.csv`` / ``significance.csv``: capillarization
  measurements per image, their relative errors (δ_ columns), pairwise
  test results.
* ``<id>.png``: 16-bit single-channel grayscale.

JSON is always written with the same key order, indentation, and float
repr, so identical data produce identical bytes; round-tripping a
canonical file reproduces it exactly. Schema violations raise
:class:`SchemaError` naming the offending record and field.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from .instances import Category, InstanceMask, LabelImage
from .masks import BoundingBox, Point2, RleMask, mask_tight_box, rle_decode, rle_encode
from .prompts import Detection, LabeledPoint, Prompt

__all__ = [
    "SchemaError",
    "ImageRecord",
    "AnnotationRecord",
    "DatasetManifest",
    "MaskRecord",
    "PredictionStore",
    "load_manifest",
    "save_manifest",
    "validate_manifest",
    "load_predictions",
    "save_predictions",
    "validate_predictions",
    "load_prompts",
    "save_prompts",
    "load_image_png",
    "save_image_png",
    "load_image_raw",
    "save_image_raw",
    "polygon_to_mask",
    "write_csv",
    "save_capillarization_csv",
    "save_errors_csv",
    "dump_json",
]

CAPILLARIZATION_COLUMNS = (
    "image_id",
    "cm_count",
    "cap_count",
    "cm_area_um2",
    "cap_area_um2",
    "cdfa",
    "cdca",
    "ccr",
)
SIGNIFICANCE_COLUMNS = ("metric", "model_a", "model_b", "kind", "t", "df", "p", "significant")
EVALUATION_COLUMNS = ("mode", "threshold_spec", "category", "mAP", "mAR", "F1")


class SchemaError(ValueError):
    """A file violated its schema; the message names the record and field."""


# ---------------------------------------------------------------------------
# canonical JSON + CSV primitives


def dump_json(obj, path: str | Path) -> None:
    """Write JSON with fixed formatting so equal data give equal bytes."""
    text = json.dumps(obj, indent=2, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _load_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """CSV with deterministic cell formatting (floats via repr, None empty)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


# ---------------------------------------------------------------------------
# field extraction helpers with record-and-field error context


def _want(record: Mapping, where: str, name: str):
    if name not in record:
        raise SchemaError(f"{where}: missing field {name!r}")
    return record[name]


def _int_field(record: Mapping, where: str, name: str) -> int:
    v = _want(record, where, name)
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"{where}.{name}: expected an integer, got {v!r}")
    return v


def _real_field(record: Mapping, where: str, name: str) -> float:
    v = _want(record, where, name)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{where}.{name}: expected a number, got {v!r}")
    return float(v)


def _str_field(record: Mapping, where: str, name: str) -> str:
    v = _want(record, where, name)
    if not isinstance(v, str):
        raise SchemaError(f"{where}.{name}: expected a string, got {v!r}")
    return v


def _number_list(value, where: str, name: str) -> list[float]:
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise SchemaError(f"{where}.{name}: expected a list of numbers")
    return [float(v) for v in value]


# ---------------------------------------------------------------------------
# dataset manifest


@dataclass(frozen=True)
class ImageRecord:
    id: int
    file: str
    width: int
    height: int
    fov_um: tuple[float, float]


@dataclass(frozen=True)
class AnnotationRecord:
    """One ground-truth instance; segmentation is RLE or polygon as read."""

    id: int
    image_id: int
    category_id: int
    bbox: tuple[float, float, float, float]
    rle: RleMask | None = None
    polygons: tuple[tuple[float, ...], ...] | None = None

    @property
    def category(self) -> Category:
        return Category.from_id(self.category_id)

    def mask(self, width: int, height: int) -> np.ndarray:
        if self.rle is not None:
            return rle_decode(self.rle)
        assert self.polygons is not None
        return polygon_to_mask(self.polygons, width, height)

    def box(self) -> BoundingBox:
        x, y, w, h = self.bbox
        return BoundingBox(x, y, x + w, y + h)


@dataclass
class DatasetManifest:
    images: list[ImageRecord]
    annotations: list[AnnotationRecord]
    categories: tuple[tuple[int, str], ...] = ((1, "CM"), (2, "CAP"))

    def image_by_id(self, image_id: int) -> ImageRecord:
        for rec in self.images:
            if rec.id == image_id:
                return rec
        raise KeyError(f"no image with id {image_id}")

    def annotations_for(self, image_id: int) -> list[AnnotationRecord]:
        return [a for a in self.annotations if a.image_id == image_id]

    def instances_for(self, image_id: int) -> list[InstanceMask]:
        rec = self.image_by_id(image_id)
        out = []
        for a in self.annotations_for(image_id):
            try:
                out.append(
                    InstanceMask(
                        mask=a.mask(rec.width, rec.height), category=a.category, score=1.0, id=a.id
                    )
                )
            except ValueError as exc:
                raise SchemaError(f"annotation {a.id}: {exc}") from exc
        return out

    def truth_label_image(self, image_id: int) -> LabelImage:
        """Paint annotations into a label image; truth instances must not overlap."""
        rec = self.image_by_id(image_id)
        labels = np.zeros((rec.height, rec.width), dtype=np.int32)
        categories: dict[int, Category] = {}
        for a in sorted(self.annotations_for(image_id), key=lambda a: a.id):
            m = a.mask(rec.width, rec.height)
            if (labels[m] != 0).any():
                raise SchemaError(
                    f"annotation {a.id}: overlaps another instance of image {image_id}"
                )
            labels[m] = a.id
            categories[a.id] = a.category
        return LabelImage(labels=labels, categories=categories)


def _segmentation_to_json(a: AnnotationRecord):
    if a.rle is not None:
        return {
            "size": [a.rle.height, a.rle.width],
            "counts": list(a.rle.counts),
        }
    assert a.polygons is not None
    return [list(ring) for ring in a.polygons]


def _parse_segmentation(raw, where: str) -> tuple[RleMask | None, tuple | None]:
    if isinstance(raw, dict):
        size = _number_list(_want(raw, where, "size"), where, "size")
        if len(size) != 2:
            raise SchemaError(f"{where}.segmentation.size: expected [height, width]")
        counts = _number_list(_want(raw, where, "counts"), where, "counts")
        if any(c != int(c) or c < 0 for c in counts):
            raise SchemaError(f"{where}.segmentation.counts: runs must be non-negative integers")
        try:
            rle = RleMask(width=int(size[1]), height=int(size[0]), counts=tuple(int(c) for c in counts))
        except ValueError as exc:
            raise SchemaError(f"{where}.segmentation: {exc}") from exc
        return rle, None
    if isinstance(raw, list):
        rings = []
        for k, ring in enumerate(raw):
            pts = _number_list(ring, where, f"segmentation[{k}]")
            if len(pts) < 6 or len(pts) % 2:
                raise SchemaError(
                    f"{where}.segmentation[{k}]: a polygon needs an even count of >= 6 numbers"
                )
            rings.append(tuple(pts))
        if not rings:
            raise SchemaError(f"{where}.segmentation: empty polygon list")
        return None, tuple(rings)
    raise SchemaError(f"{where}.segmentation: expected an RLE object or polygon list")


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    doc = {
        "images": [
            {
                "id": r.id,
                "file": r.file,
                "width": r.width,
                "height": r.height,
                "fov_um": [r.fov_um[0], r.fov_um[1]],
            }
            for r in manifest.images
        ],
        "annotations": [
            {
                "id": a.id,
                "image_id": a.image_id,
                "category_id": a.category_id,
                "bbox": list(a.bbox),
                "segmentation": _segmentation_to_json(a),
            }
            for a in manifest.annotations
        ],
        "categories": [{"id": cid, "name": name} for cid, name in manifest.categories],
    }
    dump_json(doc, path)


def load_manifest(path: str | Path) -> DatasetManifest:
    raw = _load_json(path)
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: manifest must be a JSON object")
    images = []
    for i, rec in enumerate(raw.get("images", [])):
        where = f"images[{i}]"
        fov = _number_list(_want(rec, where, "fov_um"), where, "fov_um")
        if len(fov) != 2 or min(fov) <= 0:
            raise SchemaError(f"{where}.fov_um: expected two positive numbers")
        images.append(
            ImageRecord(
                id=_int_field(rec, where, "id"),
                file=_str_field(rec, where, "file"),
                width=_int_field(rec, where, "width"),
                height=_int_field(rec, where, "height"),
                fov_um=(fov[0], fov[1]),
            )
        )
    annotations = []
    for i, rec in enumerate(raw.get("annotations", [])):
        where = f"annotations[{i}]"
        bbox = _number_list(_want(rec, where, "bbox"), where, "bbox")
        if len(bbox) != 4 or bbox[2] <= 0 or bbox[3] <= 0:
            raise SchemaError(f"{where}.bbox: expected [x, y, w, h] with positive size")
        rle, polygons = _parse_segmentation(_want(rec, where, "segmentation"), where)
        annotations.append(
            AnnotationRecord(
                id=_int_field(rec, where, "id"),
                image_id=_int_field(rec, where, "image_id"),
                category_id=_int_field(rec, where, "category_id"),
                bbox=tuple(bbox),
                rle=rle,
                polygons=polygons,
            )
        )
    categories = []
    for i, rec in enumerate(raw.get("categories", [])):
        where = f"categories[{i}]"
        categories.append((_int_field(rec, where, "id"), _str_field(rec, where, "name")))
    manifest = DatasetManifest(
        images=images, annotations=annotations, categories=tuple(categories)
    )
    _check_manifest(manifest)
    return manifest


def _check_manifest(manifest: DatasetManifest) -> None:
    """Hard schema rules; violations raise. Soft rules live in validate_manifest."""
    if manifest.categories != ((1, "CM"), (2, "CAP")):
        raise SchemaError(
            "categories must be exactly [{id:1,name:CM}, {id:2,name:CAP}], "
            f"got {manifest.categories}"
        )
    seen_images = set()
    for rec in manifest.images:
        if rec.id in seen_images:
            raise SchemaError(f"image id {rec.id} is duplicated")
        seen_images.add(rec.id)
        if rec.width <= 0 or rec.height <= 0:
            raise SchemaError(f"image {rec.id}: non-positive dimensions")
    seen_ann = set()
    for a in manifest.annotations:
        if a.id in seen_ann:
            raise SchemaError(f"annotation id {a.id} is duplicated")
        seen_ann.add(a.id)
        if a.image_id not in seen_images:
            raise SchemaError(f"annotation {a.id}: unknown image_id {a.image_id}")
        if a.category_id not in (1, 2):
            raise SchemaError(f"annotation {a.id}: category_id must be 1 or 2")
        img = manifest.image_by_id(a.image_id)
        x, y, w, h = a.bbox
        if x < 0 or y < 0 or x + w > img.width or y + h > img.height:
            raise SchemaError(f"annotation {a.id}: bbox {a.bbox} exceeds image bounds")
        if a.rle is not None and (a.rle.width != img.width or a.rle.height != img.height):
            raise SchemaError(
                f"annotation {a.id}: RLE size {(a.rle.height, a.rle.width)} "
                f"does not match image {(img.height, img.width)}"
            )


def validate_manifest(manifest: DatasetManifest) -> list[str]:
    """Soft consistency checks; returns human-readable warnings.

    The declared bbox of every annotation should equal the tight box of
    its segmentation to within one pixel on every edge.
    """
    warnings_out = []
    for a in manifest.annotations:
        img = manifest.image_by_id(a.image_id)
        m = a.mask(img.width, img.height)
        if not m.any():
            warnings_out.append(f"annotation {a.id}: segmentation decodes to an empty mask")
            continue
        tight = mask_tight_box(m)
        declared = a.box()
        gaps = (
            abs(tight.x_min - declared.x_min),
            abs(tight.y_min - declared.y_min),
            abs(tight.x_max - declared.x_max),
            abs(tight.y_max - declared.y_max),
        )
        if max(gaps) > 1.0:
            warnings_out.append(
                f"annotation {a.id}: bbox differs from segmentation tight box by "
                f"{max(gaps):.2f} px"
            )
    return warnings_out


# ---------------------------------------------------------------------------
# prediction stores


@dataclass(frozen=True)
class MaskRecord:
    image_id: int
    prompt_source_id: int
    category: Category
    rle: RleMask

    def mask(self) -> np.ndarray:
        return rle_decode(self.rle)


@dataclass
class PredictionStore:
    """Detections and masks as exchanged with out-of-core model backends."""

    detections_by_image: dict[int, list[Detection]] = field(default_factory=dict)
    mask_records: list[MaskRecord] = field(default_factory=list)

    def masks_by_image(self) -> dict[int, dict[int, MaskRecord]]:
        out: dict[int, dict[int, MaskRecord]] = {}
        for rec in self.mask_records:
            per_image = out.setdefault(rec.image_id, {})
            if rec.prompt_source_id in per_image:
                raise SchemaError(
                    f"image {rec.image_id}: duplicate mask for prompt source "
                    f"{rec.prompt_source_id}"
                )
            per_image[rec.prompt_source_id] = rec
        return out


def _box_to_xywh(box: BoundingBox) -> list[float]:
    return [box.x_min, box.y_min, box.x_max - box.x_min, box.y_max - box.y_min]


def save_detections(detections_by_image: Mapping[int, Sequence[Detection]], path: str | Path) -> None:
    records = []
    for image_id in sorted(detections_by_image):
        for det in detections_by_image[image_id]:
            records.append(
                {
                    "image_id": image_id,
                    "category_id": det.category.value,
                    "bbox": _box_to_xywh(det.box),
                    "score": det.confidence,
                }
            )
    dump_json({"detections": records}, path)


def load_detections(path: str | Path) -> dict[int, list[Detection]]:
    """Detections grouped by image; ids are 0-based file order within each image."""
    raw = _load_json(path)
    if not isinstance(raw, dict) or not isinstance(raw.get("detections"), list):
        raise SchemaError(f"{path}: expected an object with a 'detections' list")
    out: dict[int, list[Detection]] = {}
    for i, rec in enumerate(raw["detections"]):
        where = f"detections[{i}]"
        image_id = _int_field(rec, where, "image_id")
        category_id = _int_field(rec, where, "category_id")
        if category_id not in (1, 2):
            raise SchemaError(f"{where}.category_id: must be 1 or 2, got {category_id}")
        bbox = _number_list(_want(rec, where, "bbox"), where, "bbox")
        if len(bbox) != 4 or bbox[2] <= 0 or bbox[3] <= 0:
            raise SchemaError(f"{where}.bbox: expected [x, y, w, h] with positive size")
        score = _real_field(rec, where, "score")
        if not 0.0 <= score <= 1.0:
            raise SchemaError(f"{where}.score: must be within [0, 1], got {score}")
        bucket = out.setdefault(image_id, [])
        bucket.append(
            Detection(
                box=BoundingBox(bbox[0], bbox[1], bbox[0] + bbox[2], bbox[1] + bbox[3]),
                category=Category.from_id(category_id),
                confidence=score,
                id=len(bucket),
            )
        )
    return out


def save_masks(records: Sequence[MaskRecord], path: str | Path) -> None:
    ordered = sorted(records, key=lambda r: (r.image_id, r.prompt_source_id))
    dump_json(
        {
            "masks": [
                {
                    "image_id": r.image_id,
                    "prompt_source_id": r.prompt_source_id,
                    "category_id": r.category.value,
                    "segmentation": {
                        "size": [r.rle.height, r.rle.width],
                        "counts": list(r.rle.counts),
                    },
                }
                for r in ordered
            ]
        },
        path,
    )


def load_masks(path: str | Path) -> list[MaskRecord]:
    raw = _load_json(path)
    if not isinstance(raw, dict) or not isinstance(raw.get("masks"), list):
        raise SchemaError(f"{path}: expected an object with a 'masks' list")
    out = []
    for i, rec in enumerate(raw["masks"]):
        where = f"masks[{i}]"
        category_id = _int_field(rec, where, "category_id")
        if category_id not in (1, 2):
            raise SchemaError(f"{where}.category_id: must be 1 or 2, got {category_id}")
        rle, polygons = _parse_segmentation(_want(rec, where, "segmentation"), where)
        if rle is None:
            raise SchemaError(f"{where}.segmentation: masks must be RLE, not polygons")
        out.append(
            MaskRecord(
                image_id=_int_field(rec, where, "image_id"),
                prompt_source_id=_int_field(rec, where, "prompt_source_id"),
                category=Category.from_id(category_id),
                rle=rle,
            )
        )
    return out


def load_predictions(
    detections_path: str | Path | None = None, masks_path: str | Path | None = None
) -> PredictionStore:
    store = PredictionStore()
    if detections_path is not None:
        store.detections_by_image = load_detections(detections_path)
    if masks_path is not None:
        store.mask_records = load_masks(masks_path)
    return store


def save_predictions(
    store: PredictionStore,
    detections_path: str | Path | None = None,
    masks_path: str | Path | None = None,
) -> None:
    if detections_path is not None:
        save_detections(store.detections_by_image, detections_path)
    if masks_path is not None:
        save_masks(store.mask_records, masks_path)


def validate_predictions(store: PredictionStore, manifest: DatasetManifest) -> None:
    """Cross-checks against a manifest; raises SchemaError on violations."""
    image_ids = {rec.id for rec in manifest.images}
    for image_id, dets in store.detections_by_image.items():
        if image_id not in image_ids:
            raise SchemaError(f"detections reference unknown image {image_id}")
        img = manifest.image_by_id(image_id)
        for det in dets:
            if det.box.x_max > img.width or det.box.y_max > img.height:
                raise SchemaError(
                    f"image {image_id} detection {det.id}: box exceeds image bounds"
                )
    for rec in store.mask_records:
        if rec.image_id not in image_ids:
            raise SchemaError(f"mask references unknown image {rec.image_id}")
        img = manifest.image_by_id(rec.image_id)
        if rec.rle.width != img.width or rec.rle.height != img.height:
            raise SchemaError(
                f"image {rec.image_id} mask for prompt {rec.prompt_source_id}: "
                f"size {(rec.rle.height, rec.rle.width)} does not match image"
            )
    store.masks_by_image()  # raises on duplicate (image, source) pairs


# ---------------------------------------------------------------------------
# prompt store


def save_prompts(prompts_by_image: Mapping[int, Sequence[Prompt]], path: str | Path) -> None:
    doc = {}
    for image_id in sorted(prompts_by_image):
        doc[str(image_id)] = [
            {
                "box": None if p.box is None else list(p.box.as_xyxy()),
                "points": [[lp.point.x, lp.point.y, lp.label] for lp in p.points],
                "category": p.category.name,
                "source_id": p.source_id,
            }
            for p in prompts_by_image[image_id]
        ]
    dump_json(doc, path)


def load_prompts(path: str | Path) -> dict[int, list[Prompt]]:
    raw = _load_json(path)
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: expected an object keyed by image id")
    out: dict[int, list[Prompt]] = {}
    for key, entries in raw.items():
        try:
            image_id = int(key)
        except ValueError:
            raise SchemaError(f"prompt key {key!r}: image ids must be integers") from None
        if not isinstance(entries, list):
            raise SchemaError(f"prompts[{key}]: expected an array of prompts")
        prompts = []
        for i, rec in enumerate(entries):
            where = f"prompts[{key}][{i}]"
            raw_box = _want(rec, where, "box")
            if raw_box is None:
                box = None
            else:
                vals = _number_list(raw_box, where, "box")
                if len(vals) != 4:
                    raise SchemaError(f"{where}.box: expected [x_min, y_min, x_max, y_max]")
                try:
                    box = BoundingBox(*vals)
                except ValueError as exc:
                    raise SchemaError(f"{where}.box: {exc}") from exc
            points = []
            raw_points = _want(rec, where, "points")
            if not isinstance(raw_points, list):
                raise SchemaError(f"{where}.points: expected a list")
            for k, triple in enumerate(raw_points):
                vals = _number_list(triple, where, f"points[{k}]")
                if len(vals) != 3 or vals[2] not in (0.0, 1.0):
                    raise SchemaError(f"{where}.points[{k}]: expected [x, y, label01]")
                points.append(LabeledPoint(point=Point2(vals[0], vals[1]), label=int(vals[2])))
            try:
                category = Category.from_name(_str_field(rec, where, "category"))
            except ValueError as exc:
                raise SchemaError(f"{where}.category: {exc}") from exc
            prompts.append(
                Prompt(
                    box=box,
                    points=tuple(points),
                    category=category,
                    source_id=_int_field(rec, where, "source_id"),
                )
            )
        out[image_id] = prompts
    return out


# ---------------------------------------------------------------------------
# images


def save_image_png(image: np.ndarray, path: str | Path) -> None:
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {arr.shape}")
    if arr.dtype != np.uint16:
        if np.issubdtype(arr.dtype, np.integer) and arr.min() >= 0 and arr.max() <= 65535:
            arr = arr.astype(np.uint16)
        else:
            raise ValueError(f"expected uint16 samples, got dtype {arr.dtype}")
    Image.fromarray(arr).save(str(path), format="PNG")


def load_image_png(path: str | Path) -> np.ndarray:
    with Image.open(str(path)) as img:
        arr = np.array(img)
    if arr.ndim != 2:
        raise SchemaError(f"{path}: expected single-channel grayscale, got shape {arr.shape}")
    if arr.dtype == np.int32:  # Pillow reads 16-bit PNG as mode I on some paths
        if arr.min() < 0 or arr.max() > 65535:
            raise SchemaError(f"{path}: samples exceed 16-bit range")
        arr = arr.astype(np.uint16)
    if arr.dtype != np.uint16:
        arr = arr.astype(np.uint16)
    return arr


def save_image_raw(image: np.ndarray, path: str | Path) -> None:
    """Headerless little-endian uint16 with a JSON sidecar holding dimensions."""
    arr = np.asarray(image, dtype=np.uint16)
    Path(path).write_bytes(arr.astype("<u2").tobytes(order="C"))
    dump_json({"width": arr.shape[1], "height": arr.shape[0]}, str(path) + ".json")


def load_image_raw(path: str | Path) -> np.ndarray:
    sidecar = _load_json(str(path) + ".json")
    width = _int_field(sidecar, "sidecar", "width")
    height = _int_field(sidecar, "sidecar", "height")
    data = np.frombuffer(Path(path).read_bytes(), dtype="<u2")
    if data.size != width * height:
        raise SchemaError(f"{path}: raw size {data.size} != width*height {width * height}")
    return data.reshape((height, width)).astype(np.uint16)


# ---------------------------------------------------------------------------
# polygon rasterization


def polygon_to_mask(
    rings: Sequence[Sequence[float]], width: int, height: int
) -> np.ndarray:
    """Even-odd fill of each ring at pixel centers, united across rings.

    A pixel (x, y) is covered when its center (x+0.5, y+0.5) lies inside
    a ring by the crossing-number rule, consistent with how boxes are
    rasterized elsewhere.
    """
    out = np.zeros((height, width), dtype=bool)
    cx = np.arange(width) + 0.5
    cy = np.arange(height) + 0.5
    for ring in rings:
        xs = np.asarray(ring[0::2], dtype=np.float64)
        ys = np.asarray(ring[1::2], dtype=np.float64)
        crossings = np.zeros((height, width), dtype=np.int64)
        n = len(xs)
        for e in range(n):
            x1, y1 = xs[e], ys[e]
            x2, y2 = xs[(e + 1) % n], ys[(e + 1) % n]
            if y1 == y2:
                continue
            straddles = (y1 > cy) != (y2 > cy)  # per row
            if not straddles.any():
                continue
            x_at = x1 + (cy - y1) * (x2 - x1) / (y2 - y1)  # per row
            crossings += (straddles[:, None]) & (cx[None, :] < x_at[:, None])
        out |= crossings % 2 == 1
    return out


# ---------------------------------------------------------------------------
# report CSVs


def save_capillarization_csv(rows: Sequence[tuple[int, Mapping[str, float | None]]], path: str | Path) -> None:
    """``report.csv``: one row per image with the seven measurements."""
    body = []
    for image_id, metrics in rows:
        body.append([image_id] + [metrics.get(name) for name in CAPILLARIZATION_COLUMNS[1:]])
    write_csv(path, CAPILLARIZATION_COLUMNS, body)


def save_errors_csv(rows: Sequence[tuple[int, Mapping[str, float | None]]], path: str | Path) -> None:
    """``errors.csv``: same layout as report.csv with δ_-prefixed columns."""
    header = ["image_id"] + [f"δ_{name}" for name in CAPILLARIZATION_COLUMNS[1:]]
    body = []
    for image_id, errors in rows:
        body.append([image_id] + [errors.get(name) for name in CAPILLARIZATION_COLUMNS[1:]])
    write_csv(path, header, body)
