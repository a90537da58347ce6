"""Interchange files: run-length coding, prompt parsing, self-checks."""

import json

import numpy as np
import pytest

from model_runner import (
    DetectionRecord,
    MaskRecord,
    SchemaError,
    decode_mask,
    encode_mask,
    read_prompts,
    self_check_detections,
    self_check_masks,
    write_detections,
    write_masks,
)


def prompt_doc():
    return {
        "3": [
            {
                "box": [4.0, 4.0, 24.0, 24.0],
                "points": [[14.0, 14.0, 1], [40.0, 40.0, 0]],
                "category": "CM",
                "source_id": 0,
            },
            {"box": None, "points": [[40.5, 40.5, 1]], "category": "CAP", "source_id": 1},
        ]
    }


def write_prompt_doc(tmp_path, doc):
    path = tmp_path / "prompts.json"
    path.write_text(json.dumps(doc))
    return path


class TestRunLengthCoding:
    def test_round_trip(self):
        rng = np.random.default_rng(5)
        mask = rng.random((23, 17)) < 0.4
        assert (decode_mask(encode_mask(mask)) == mask).all()

    def test_column_major_background_first(self):
        mask = np.zeros((4, 3), dtype=bool)
        mask[1, 0] = True
        doc = encode_mask(mask)
        assert doc["size"] == [4, 3]
        assert doc["counts"] == [1, 1, 10]

    def test_foreground_first_pixel_gets_zero_run(self):
        mask = np.ones((2, 2), dtype=bool)
        assert encode_mask(mask)["counts"] == [0, 4]

    def test_empty_mask_is_one_background_run(self):
        mask = np.zeros((5, 4), dtype=bool)
        assert encode_mask(mask)["counts"] == [20]


class TestReadPrompts:
    def test_parses_boxes_points_categories(self, tmp_path):
        prompts = read_prompts(write_prompt_doc(tmp_path, prompt_doc()))
        assert list(prompts) == [3]
        first, second = prompts[3]
        assert first.box == (4.0, 4.0, 24.0, 24.0)
        assert first.points == ((14.0, 14.0, 1), (40.0, 40.0, 0))
        assert first.category_id == 1
        assert second.box is None
        assert second.category_id == 2
        assert second.source_id == 1

    def test_rejects_unknown_category(self, tmp_path):
        doc = prompt_doc()
        doc["3"][0]["category"] = "VESSEL"
        with pytest.raises(SchemaError, match="category"):
            read_prompts(write_prompt_doc(tmp_path, doc))

    def test_rejects_bad_point_label(self, tmp_path):
        doc = prompt_doc()
        doc["3"][0]["points"] = [[1.0, 1.0, 2]]
        with pytest.raises(SchemaError, match="label must be 0 or 1"):
            read_prompts(write_prompt_doc(tmp_path, doc))

    def test_rejects_degenerate_box(self, tmp_path):
        doc = prompt_doc()
        doc["3"][0]["box"] = [10.0, 4.0, 10.0, 24.0]
        with pytest.raises(SchemaError, match="positive extent"):
            read_prompts(write_prompt_doc(tmp_path, doc))

    def test_rejects_prompt_with_no_anchor(self, tmp_path):
        doc = prompt_doc()
        doc["3"][1] = {"box": None, "points": [[1.0, 1.0, 0]], "category": "CAP", "source_id": 1}
        with pytest.raises(SchemaError, match="neither a box nor a positive point"):
            read_prompts(write_prompt_doc(tmp_path, doc))

    def test_rejects_duplicate_source_ids(self, tmp_path):
        doc = prompt_doc()
        doc["3"][1]["source_id"] = 0
        with pytest.raises(SchemaError, match="duplicate source_id"):
            read_prompts(write_prompt_doc(tmp_path, doc))

    def test_rejects_non_integer_image_key(self, tmp_path):
        with pytest.raises(SchemaError, match="not an image id"):
            read_prompts(write_prompt_doc(tmp_path, {"left": []}))

    def test_images_come_back_sorted(self, tmp_path):
        doc = {"9": [], "2": []}
        assert list(read_prompts(write_prompt_doc(tmp_path, doc))) == [2, 9]


class TestWriters:
    def test_detections_sorted_by_image_inner_order_kept(self, tmp_path):
        records = {
            5: [DetectionRecord(5, 2, (8.0, 8.0, 4.0, 4.0), 0.5)],
            1: [
                DetectionRecord(1, 1, (0.0, 0.0, 9.0, 9.0), 0.9),
                DetectionRecord(1, 2, (3.0, 3.0, 2.0, 2.0), 0.4),
            ],
        }
        path = tmp_path / "detections.json"
        write_detections(records, path)
        rows = json.loads(path.read_text())["detections"]
        assert [r["image_id"] for r in rows] == [1, 1, 5]
        assert [r["score"] for r in rows] == [0.9, 0.4, 0.5]
        assert self_check_detections(path) == 3

    def test_masks_sorted_by_image_then_source(self, tmp_path):
        seg = encode_mask(np.ones((2, 2), dtype=bool))
        records = [
            MaskRecord(4, 1, 2, seg),
            MaskRecord(2, 0, 1, seg),
            MaskRecord(4, 0, 1, seg),
        ]
        path = tmp_path / "masks.json"
        write_masks(records, path)
        rows = json.loads(path.read_text())["masks"]
        assert [(r["image_id"], r["prompt_source_id"]) for r in rows] == [(2, 0), (4, 0), (4, 1)]

    def test_equal_data_equal_bytes(self, tmp_path):
        records = {1: [DetectionRecord(1, 1, (0.0, 0.0, 2.0, 2.0), 0.25)]}
        write_detections(records, tmp_path / "a.json")
        write_detections(records, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_trailing_newline(self, tmp_path):
        write_detections({}, tmp_path / "empty.json")
        text = (tmp_path / "empty.json").read_text()
        assert text.endswith("\n")
        assert json.loads(text) == {"detections": []}


class TestSelfChecks:
    def test_detection_score_out_of_range(self, tmp_path):
        path = tmp_path / "detections.json"
        doc = {
            "detections": [
                {"image_id": 1, "category_id": 1, "bbox": [0, 0, 2.0, 2.0], "score": 1.5}
            ]
        }
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match="score"):
            self_check_detections(path)

    def test_detection_extra_field(self, tmp_path):
        path = tmp_path / "detections.json"
        doc = {
            "detections": [
                {
                    "image_id": 1,
                    "category_id": 1,
                    "bbox": [0, 0, 2.0, 2.0],
                    "score": 0.5,
                    "mask": [],
                }
            ]
        }
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match="wrong field set"):
            self_check_detections(path)

    def test_mask_counts_must_sum_to_pixels(self, tmp_path):
        path = tmp_path / "masks.json"
        seg = {"size": [2, 2], "counts": [3]}
        doc = {
            "masks": [
                {"image_id": 1, "prompt_source_id": 0, "category_id": 1, "segmentation": seg}
            ]
        }
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match="counts sum"):
            self_check_masks(path, {1: (2, 2)})

    def test_mask_dimensions_must_match_image(self, tmp_path):
        path = tmp_path / "masks.json"
        write_masks([MaskRecord(1, 0, 1, encode_mask(np.ones((2, 2), dtype=bool)))], path)
        with pytest.raises(SchemaError, match="does not match image"):
            self_check_masks(path, {1: (4, 4)})

    def test_mask_for_unknown_image(self, tmp_path):
        path = tmp_path / "masks.json"
        write_masks([MaskRecord(9, 0, 1, encode_mask(np.ones((2, 2), dtype=bool)))], path)
        with pytest.raises(SchemaError, match="unknown image id 9"):
            self_check_masks(path, {1: (2, 2)})

    def test_duplicate_prompt_source_rejected(self, tmp_path):
        path = tmp_path / "masks.json"
        seg = encode_mask(np.ones((2, 2), dtype=bool))
        doc = {
            "masks": [
                {"image_id": 1, "prompt_source_id": 0, "category_id": 1, "segmentation": seg},
                {"image_id": 1, "prompt_source_id": 0, "category_id": 2, "segmentation": seg},
            ]
        }
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match="duplicate mask"):
            self_check_masks(path, {1: (2, 2)})

    def test_negative_run_rejected(self, tmp_path):
        path = tmp_path / "masks.json"
        seg = {"size": [2, 2], "counts": [-1, 5]}
        doc = {
            "masks": [
                {"image_id": 1, "prompt_source_id": 0, "category_id": 1, "segmentation": seg}
            ]
        }
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError, match="ints >= 0"):
            self_check_masks(path, {1: (2, 2)})
