"""On-disk formats: canonical JSON stores, CSVs, images, rasterization.

Round-trips are asserted at the byte level, not just value equality,
because downstream determinism checks diff whole output directories.
The polygon rasterizer is compared against a per-pixel crossing-number
oracle written as a plain double loop.
"""

import numpy as np
import pytest

from capseg import (
    AnnotationRecord,
    BoundingBox,
    Category,
    DatasetManifest,
    Detection,
    ImageRecord,
    LabeledPoint,
    MaskRecord,
    Point2,
    PredictionStore,
    Prompt,
    RleMask,
    SchemaError,
    dump_json,
    load_detections,
    load_image_png,
    load_image_raw,
    load_manifest,
    load_masks,
    load_prompts,
    polygon_to_mask,
    rle_decode,
    rle_encode,
    save_capillarization_csv,
    save_detections,
    save_errors_csv,
    save_image_png,
    save_image_raw,
    save_manifest,
    save_masks,
    save_prompts,
    validate_manifest,
    validate_predictions,
    write_csv,
)
from conftest import rect_mask


def toy_manifest(height=16, width=16):
    mask = rect_mask(height, width, 2, 3, 5, 4)
    rle = rle_encode(mask)
    return DatasetManifest(
        images=[ImageRecord(id=0, file="0.png", width=width, height=height, fov_um=(42.5, 42.5))],
        annotations=[
            AnnotationRecord(id=1, image_id=0, category_id=1, bbox=(3.0, 2.0, 4.0, 5.0), rle=rle)
        ],
    )


class TestManifest:
    def test_round_trip_bytes(self, tmp_path):
        first = tmp_path / "dataset.json"
        second = tmp_path / "again.json"
        save_manifest(toy_manifest(), first)
        save_manifest(load_manifest(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_instances_decode(self, tmp_path):
        path = tmp_path / "dataset.json"
        save_manifest(toy_manifest(), path)
        insts = load_manifest(path).instances_for(0)
        assert len(insts) == 1
        assert insts[0].category is Category.CM
        assert insts[0].area_px == 20

    def test_unknown_image_named_in_error(self, tmp_path):
        manifest = toy_manifest()
        manifest.annotations[0] = AnnotationRecord(
            id=7, image_id=99, category_id=1, bbox=(3.0, 2.0, 4.0, 5.0),
            rle=manifest.annotations[0].rle,
        )
        path = tmp_path / "dataset.json"
        save_manifest(manifest, path)
        with pytest.raises(SchemaError, match="annotation 7: unknown image_id 99"):
            load_manifest(path)

    def test_missing_field_named(self, tmp_path):
        path = tmp_path / "dataset.json"
        dump_json({"images": [{"id": 0}], "annotations": [], "categories": []}, path)
        with pytest.raises(SchemaError, match=r"images\[0\]: missing field 'fov_um'"):
            load_manifest(path)

    def test_wrong_categories_rejected(self, tmp_path):
        path = tmp_path / "dataset.json"
        doc = {
            "images": [],
            "annotations": [],
            "categories": [{"id": 1, "name": "CELL"}],
        }
        dump_json(doc, path)
        with pytest.raises(SchemaError, match="categories must be exactly"):
            load_manifest(path)

    def test_duplicate_annotation_id(self, tmp_path):
        manifest = toy_manifest()
        manifest.annotations.append(manifest.annotations[0])
        path = tmp_path / "dataset.json"
        save_manifest(manifest, path)
        with pytest.raises(SchemaError, match="annotation id 1 is duplicated"):
            load_manifest(path)

    def test_bbox_bounds_checked(self, tmp_path):
        manifest = toy_manifest()
        rle = manifest.annotations[0].rle
        manifest.annotations[0] = AnnotationRecord(
            id=1, image_id=0, category_id=1, bbox=(10.0, 10.0, 10.0, 10.0), rle=rle
        )
        path = tmp_path / "dataset.json"
        save_manifest(manifest, path)
        with pytest.raises(SchemaError, match="exceeds image bounds"):
            load_manifest(path)

    def test_rle_size_mismatch(self, tmp_path):
        manifest = toy_manifest()
        small = rle_encode(rect_mask(8, 8, 1, 1, 2, 2))
        manifest.annotations[0] = AnnotationRecord(
            id=1, image_id=0, category_id=1, bbox=(3.0, 2.0, 4.0, 5.0), rle=small
        )
        path = tmp_path / "dataset.json"
        save_manifest(manifest, path)
        with pytest.raises(SchemaError, match="does not match image"):
            load_manifest(path)

    def test_bad_counts_sum(self, tmp_path):
        path = tmp_path / "dataset.json"
        doc = {
            "images": [
                {"id": 0, "file": "0.png", "width": 4, "height": 4, "fov_um": [10.0, 10.0]}
            ],
            "annotations": [
                {
                    "id": 1,
                    "image_id": 0,
                    "category_id": 1,
                    "bbox": [0.0, 0.0, 2.0, 2.0],
                    "segmentation": {"size": [4, 4], "counts": [3, 3]},
                }
            ],
            "categories": [{"id": 1, "name": "CM"}, {"id": 2, "name": "CAP"}],
        }
        dump_json(doc, path)
        with pytest.raises(SchemaError, match=r"annotations\[0\].segmentation"):
            load_manifest(path)

    def test_short_polygon_rejected(self, tmp_path):
        path = tmp_path / "dataset.json"
        doc = {
            "images": [
                {"id": 0, "file": "0.png", "width": 4, "height": 4, "fov_um": [10.0, 10.0]}
            ],
            "annotations": [
                {
                    "id": 1,
                    "image_id": 0,
                    "category_id": 1,
                    "bbox": [0.0, 0.0, 2.0, 2.0],
                    "segmentation": [[0.0, 0.0, 2.0, 0.0]],
                }
            ],
            "categories": [{"id": 1, "name": "CM"}, {"id": 2, "name": "CAP"}],
        }
        dump_json(doc, path)
        with pytest.raises(SchemaError, match="even count of >= 6 numbers"):
            load_manifest(path)

    def test_overlapping_truth_rejected(self, tmp_path):
        mask = rect_mask(16, 16, 2, 3, 5, 4)
        rle = rle_encode(mask)
        manifest = toy_manifest()
        manifest.annotations.append(
            AnnotationRecord(id=2, image_id=0, category_id=2, bbox=(3.0, 2.0, 4.0, 5.0), rle=rle)
        )
        path = tmp_path / "dataset.json"
        save_manifest(manifest, path)
        loaded = load_manifest(path)
        with pytest.raises(SchemaError, match="annotation 2: overlaps"):
            loaded.truth_label_image(0)


class TestManifestValidator:
    def test_clean_manifest_no_warnings(self):
        assert validate_manifest(toy_manifest()) == []

    def test_one_pixel_slack_allowed(self):
        manifest = toy_manifest()
        rle = manifest.annotations[0].rle
        manifest.annotations[0] = AnnotationRecord(
            id=1, image_id=0, category_id=1, bbox=(2.0, 2.0, 5.0, 5.0), rle=rle
        )
        assert validate_manifest(manifest) == []

    def test_loose_bbox_warned(self):
        manifest = toy_manifest()
        rle = manifest.annotations[0].rle
        manifest.annotations[0] = AnnotationRecord(
            id=1, image_id=0, category_id=1, bbox=(1.0, 0.0, 9.0, 9.0), rle=rle
        )
        warnings = validate_manifest(manifest)
        assert len(warnings) == 1
        assert "differs from segmentation tight box" in warnings[0]

    def test_empty_segmentation_warned(self):
        manifest = toy_manifest()
        empty = RleMask(width=16, height=16, counts=(256,))
        manifest.annotations[0] = AnnotationRecord(
            id=1, image_id=0, category_id=1, bbox=(3.0, 2.0, 4.0, 5.0), rle=empty
        )
        warnings = validate_manifest(manifest)
        assert warnings == ["annotation 1: segmentation decodes to an empty mask"]


class TestDetections:
    def test_round_trip_bytes_and_ids(self, tmp_path):
        dets = {
            3: [
                Detection(box=BoundingBox(0, 0, 5, 5), category=Category.CM, confidence=0.75, id=0),
                Detection(box=BoundingBox(4, 4, 9, 9), category=Category.CAP, confidence=0.5, id=1),
            ],
            1: [Detection(box=BoundingBox(1, 1, 3, 3), category=Category.CM, confidence=1.0, id=0)],
        }
        first = tmp_path / "detections.json"
        save_detections(dets, first)
        loaded = load_detections(first)
        assert sorted(loaded) == [1, 3]
        assert [d.id for d in loaded[3]] == [0, 1]
        assert loaded[3][1].category is Category.CAP
        second = tmp_path / "again.json"
        save_detections(loaded, second)
        assert first.read_bytes() == second.read_bytes()

    def test_score_out_of_range(self, tmp_path):
        path = tmp_path / "detections.json"
        dump_json(
            {
                "detections": [
                    {"image_id": 0, "category_id": 1, "bbox": [0, 0, 2, 2], "score": 1.5}
                ]
            },
            path,
        )
        with pytest.raises(SchemaError, match=r"detections\[0\].score"):
            load_detections(path)

    def test_degenerate_bbox(self, tmp_path):
        path = tmp_path / "detections.json"
        dump_json(
            {
                "detections": [
                    {"image_id": 0, "category_id": 1, "bbox": [0, 0, 0, 2], "score": 0.5}
                ]
            },
            path,
        )
        with pytest.raises(SchemaError, match=r"detections\[0\].bbox"):
            load_detections(path)


class TestMasks:
    def test_round_trip_bytes(self, tmp_path):
        records = [
            MaskRecord(
                image_id=0,
                prompt_source_id=i,
                category=Category.CM if i == 0 else Category.CAP,
                rle=rle_encode(rect_mask(8, 8, i, i, 3, 3)),
            )
            for i in range(2)
        ]
        first = tmp_path / "masks.json"
        save_masks(records, first)
        loaded = load_masks(first)
        assert [r.prompt_source_id for r in loaded] == [0, 1]
        assert np.array_equal(loaded[0].mask(), rect_mask(8, 8, 0, 0, 3, 3))
        second = tmp_path / "again.json"
        save_masks(loaded, second)
        assert first.read_bytes() == second.read_bytes()

    def test_polygon_segmentation_rejected(self, tmp_path):
        path = tmp_path / "masks.json"
        dump_json(
            {
                "masks": [
                    {
                        "image_id": 0,
                        "prompt_source_id": 0,
                        "category_id": 1,
                        "segmentation": [[0.0, 0.0, 4.0, 0.0, 4.0, 4.0]],
                    }
                ]
            },
            path,
        )
        with pytest.raises(SchemaError, match="must be RLE"):
            load_masks(path)

    def test_duplicate_prompt_source_rejected(self):
        rle = rle_encode(rect_mask(8, 8, 0, 0, 3, 3))
        store = PredictionStore(
            mask_records=[
                MaskRecord(image_id=0, prompt_source_id=0, category=Category.CM, rle=rle),
                MaskRecord(image_id=0, prompt_source_id=0, category=Category.CAP, rle=rle),
            ]
        )
        with pytest.raises(SchemaError, match="duplicate mask for prompt source 0"):
            store.masks_by_image()


class TestValidatePredictions:
    def test_unknown_image(self):
        store = PredictionStore(
            detections_by_image={
                5: [Detection(box=BoundingBox(0, 0, 2, 2), category=Category.CM, confidence=1.0, id=0)]
            }
        )
        with pytest.raises(SchemaError, match="unknown image 5"):
            validate_predictions(store, toy_manifest())

    def test_box_beyond_image(self):
        store = PredictionStore(
            detections_by_image={
                0: [Detection(box=BoundingBox(0, 0, 20, 20), category=Category.CM, confidence=1.0, id=0)]
            }
        )
        with pytest.raises(SchemaError, match="box exceeds image bounds"):
            validate_predictions(store, toy_manifest())

    def test_mask_size_mismatch(self):
        store = PredictionStore(
            mask_records=[
                MaskRecord(
                    image_id=0,
                    prompt_source_id=0,
                    category=Category.CM,
                    rle=rle_encode(rect_mask(8, 8, 0, 0, 2, 2)),
                )
            ]
        )
        with pytest.raises(SchemaError, match="does not match image"):
            validate_predictions(store, toy_manifest())


class TestPrompts:
    def test_round_trip_bytes_and_values(self, tmp_path):
        prompts = {
            0: [
                Prompt(
                    box=BoundingBox(0, 0, 10, 10),
                    points=(
                        LabeledPoint(point=Point2(5.0, 5.0), label=1),
                        LabeledPoint(point=Point2(7.0, 7.0), label=0),
                    ),
                    category=Category.CM,
                    source_id=0,
                ),
                Prompt(box=None, points=(LabeledPoint(point=Point2(2.0, 2.0), label=1),),
                       category=Category.CAP, source_id=1),
            ]
        }
        first = tmp_path / "prompts.json"
        save_prompts(prompts, first)
        loaded = load_prompts(first)
        assert loaded == prompts
        second = tmp_path / "again.json"
        save_prompts(loaded, second)
        assert first.read_bytes() == second.read_bytes()

    def test_bad_label_rejected(self, tmp_path):
        path = tmp_path / "prompts.json"
        dump_json(
            {"0": [{"box": None, "points": [[1.0, 1.0, 2.0]], "category": "CM", "source_id": 0}]},
            path,
        )
        with pytest.raises(SchemaError, match=r"prompts\[0\]\[0\].points\[0\]"):
            load_prompts(path)

    def test_bad_category_rejected(self, tmp_path):
        path = tmp_path / "prompts.json"
        dump_json(
            {"0": [{"box": None, "points": [[1.0, 1.0, 1.0]], "category": "VESSEL", "source_id": 0}]},
            path,
        )
        with pytest.raises(SchemaError, match="category"):
            load_prompts(path)

    def test_non_integer_key_rejected(self, tmp_path):
        path = tmp_path / "prompts.json"
        dump_json({"first": []}, path)
        with pytest.raises(SchemaError, match="image ids must be integers"):
            load_prompts(path)


class TestImages:
    def test_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(51)
        img = rng.integers(0, 65536, size=(32, 24), dtype=np.uint16)
        path = tmp_path / "0.png"
        save_image_png(img, path)
        assert np.array_equal(load_image_png(path), img)

    def test_png_bytes_deterministic(self, tmp_path):
        img = np.arange(256, dtype=np.uint16).reshape(16, 16) * 257
        a, b = tmp_path / "a.png", tmp_path / "b.png"
        save_image_png(img, a)
        save_image_png(img, b)
        assert a.read_bytes() == b.read_bytes()

    def test_png_rejects_color(self, tmp_path):
        with pytest.raises(ValueError, match="2D"):
            save_image_png(np.zeros((4, 4, 3), dtype=np.uint16), tmp_path / "x.png")

    def test_raw_round_trip(self, tmp_path):
        rng = np.random.default_rng(52)
        img = rng.integers(0, 65536, size=(7, 9), dtype=np.uint16)
        path = tmp_path / "img.raw"
        save_image_raw(img, path)
        assert np.array_equal(load_image_raw(path), img)

    def test_raw_size_mismatch(self, tmp_path):
        path = tmp_path / "img.raw"
        save_image_raw(np.zeros((4, 4), dtype=np.uint16), path)
        dump_json({"width": 5, "height": 5}, str(path) + ".json")
        with pytest.raises(SchemaError, match="raw size"):
            load_image_raw(path)


class TestPolygonRaster:
    def test_axis_aligned_rectangle(self):
        # centers (x+0.5, y+0.5) inside [0,10]x[0,6] are x 0..9, y 0..5
        got = polygon_to_mask([[0, 0, 10, 0, 10, 6, 0, 6]], width=16, height=16)
        assert np.array_equal(got, rect_mask(16, 16, 0, 0, 6, 10))

    def test_matches_crossing_number_oracle(self):
        rings = [
            [2.0, 1.0, 13.5, 3.0, 11.0, 12.0, 4.5, 10.0],  # irregular quad
            [1.0, 1.0, 5.0, 1.0, 3.0, 6.5],  # triangle
        ]
        for ring in rings:
            got = polygon_to_mask([ring], width=16, height=16)
            xs, ys = ring[0::2], ring[1::2]
            n = len(xs)
            for y in range(16):
                for x in range(16):
                    cx, cy = x + 0.5, y + 0.5
                    crossings = 0
                    for e in range(n):
                        x1, y1 = xs[e], ys[e]
                        x2, y2 = xs[(e + 1) % n], ys[(e + 1) % n]
                        if (y1 > cy) != (y2 > cy):
                            x_at = x1 + (cy - y1) * (x2 - x1) / (y2 - y1)
                            if cx < x_at:
                                crossings += 1
                    assert got[y, x] == (crossings % 2 == 1), (ring, x, y)

    def test_polygon_annotation_matches_rle_fixture(self, tmp_path):
        # the same rectangle delivered as polygon and as RLE must decode equal
        mask = rect_mask(16, 16, 2, 3, 5, 4)
        poly_manifest = DatasetManifest(
            images=[ImageRecord(id=0, file="0.png", width=16, height=16, fov_um=(42.5, 42.5))],
            annotations=[
                AnnotationRecord(
                    id=1,
                    image_id=0,
                    category_id=1,
                    bbox=(3.0, 2.0, 4.0, 5.0),
                    polygons=((3.0, 2.0, 7.0, 2.0, 7.0, 7.0, 3.0, 7.0),),
                )
            ],
        )
        path = tmp_path / "dataset.json"
        save_manifest(poly_manifest, path)
        insts = load_manifest(path).instances_for(0)
        assert np.array_equal(insts[0].mask, mask)
        assert np.array_equal(rle_decode(rle_encode(insts[0].mask)), mask)

    def test_multiple_rings_union(self):
        rings = [[0, 0, 4, 0, 4, 4, 0, 4], [8, 8, 12, 8, 12, 12, 8, 12]]
        got = polygon_to_mask(rings, width=16, height=16)
        expected = rect_mask(16, 16, 0, 0, 4, 4) | rect_mask(16, 16, 8, 8, 4, 4)
        assert np.array_equal(got, expected)


class TestCsv:
    def test_report_layout(self, tmp_path):
        path = tmp_path / "report.csv"
        save_capillarization_csv(
            [(0, {"cm_count": 4, "cap_count": 18, "cm_area_um2": 1200.0,
                  "cap_area_um2": 36.0, "cdfa": 18 / 1806.25, "cdca": 0.015, "ccr": 4.5})],
            path,
        )
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "image_id,cm_count,cap_count,cm_area_um2,cap_area_um2,cdfa,cdca,ccr"
        assert lines[1].startswith("0,4,18,1200.0,36.0,")

    def test_errors_layout_with_none(self, tmp_path):
        path = tmp_path / "errors.csv"
        save_errors_csv(
            [(0, {"cm_count": 0.0, "cap_count": 0.1, "cm_area_um2": None,
                  "cap_area_um2": 0.0, "cdfa": 0.0, "cdca": None, "ccr": -0.5})],
            path,
        )
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "image_id,δ_cm_count,δ_cap_count,δ_cm_area_um2,δ_cap_area_um2,δ_cdfa,δ_cdca,δ_ccr"
        assert lines[1] == "0,0.0,0.1,,0.0,0.0,,-0.5"

    def test_float_cells_use_repr(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ("a",), [(0.1 + 0.2,)])
        assert path.read_text(encoding="utf-8").splitlines()[1] == repr(0.1 + 0.2)

    def test_bool_cells(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ("flag",), [(True,), (False,)])
        assert path.read_text(encoding="utf-8").splitlines()[1:] == ["true", "false"]


class TestCanonicalJson:
    def test_dump_is_stable(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        doc = {"x": [1.5, 2.25], "y": {"nested": True}}
        dump_json(doc, a)
        dump_json(doc, b)
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text(encoding="utf-8").endswith("\n")

    def test_invalid_json_is_schema_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(SchemaError, match="not valid JSON"):
            load_manifest(path)
