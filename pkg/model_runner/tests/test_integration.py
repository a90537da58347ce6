"""End-to-end smoke against the core pipeline, files only.

Drives both command-line tools as subprocesses on a 3-image dataset: the
core synthesizes images and prompts, this package answers with detections
and masks, and the core's evaluate and quantify stages consume them. The
two packages share no code path here, only the JSON files.
"""

import json
import shutil
import subprocess
import sys

import pytest

CAPSEG = shutil.which("capseg")
MODEL_RUNNER = shutil.which("model-runner")

pytestmark = pytest.mark.skipif(
    CAPSEG is None or MODEL_RUNNER is None,
    reason="integration smoke needs both console scripts on PATH",
)

CONFIG = {
    "scenes": 3,
    "scene": {
        "width": 128,
        "height": 128,
        "cm_count_range": [4, 6],
        "capillaries_per_cm_range": [1, 2],
    },
}


def run_ok(*argv):
    proc = subprocess.run([str(a) for a in argv], capture_output=True, text=True)
    assert proc.returncode == 0, f"{argv[0]} failed:\n{proc.stdout}\n{proc.stderr}"
    return proc


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Dataset plus one full detect-prompt-segment round trip."""
    root = tmp_path_factory.mktemp("smoke")
    config = root / "config.json"
    config.write_text(json.dumps(CONFIG))
    data = root / "data"
    run = root / "run"
    run_ok(CAPSEG, "synth", "--config", config, "--out", data, "--seed", "11")
    run_ok(MODEL_RUNNER, "detect", "--images", data, "--out", run, "--deterministic")
    run_ok(CAPSEG, "prompt", "--config", config, "--detections", run / "detections.json",
           "--out", run)
    run_ok(MODEL_RUNNER, "segment", "--images", data, "--prompts", run / "prompts.json",
           "--out", run, "--deterministic")
    return config, data, run


class TestInterchange:
    def test_detections_cover_every_image(self, workspace):
        _, _, run = workspace
        rows = json.loads((run / "detections.json").read_text())["detections"]
        assert {r["image_id"] for r in rows} == {0, 1, 2}
        assert all(r["category_id"] in (1, 2) for r in rows)

    def test_one_mask_per_prompt(self, workspace):
        _, _, run = workspace
        prompts = json.loads((run / "prompts.json").read_text())
        masks = json.loads((run / "masks.json").read_text())["masks"]
        expected = {
            (int(image_id), p["source_id"]) for image_id, plist in prompts.items() for p in plist
        }
        produced = {(m["image_id"], m["prompt_source_id"]) for m in masks}
        assert produced == expected
        assert len(masks) == len(expected)

    def test_core_accepts_masks_as_file_segmenter(self, workspace):
        """The core's own strict loader validates the artifacts."""
        config, data, run = workspace
        out = run.parent / "revalidate"
        run_ok(CAPSEG, "segment", "--config", config, "--dataset", data,
               "--prompts", run / "prompts.json", "--segmenter", "file",
               "--masks", run / "masks.json", "--out", out)
        assert (out / "masks.json").read_bytes() == (run / "masks.json").read_bytes()


class TestEvaluateAndQuantify:
    def test_evaluate_completes_and_scores_are_perfect(self, workspace):
        config, data, run = workspace
        run_ok(CAPSEG, "evaluate", "--config", config, "--dataset", data,
               "--masks", run / "masks.json", "--detections", run / "detections.json",
               "--out", run)
        doc = json.loads((run / "evaluation.json").read_text())
        clean = {k: v for k, v in doc["summary"].items() if k != "mode"}
        assert clean, "summary has no metric rows"
        assert all(v == 1.0 for v in clean.values()), doc["summary"]

    def test_quantify_completes_with_zero_errors(self, workspace):
        config, data, run = workspace
        run_ok(CAPSEG, "quantify", "--config", config, "--dataset", data,
               "--masks", run / "masks.json", "--detections", run / "detections.json",
               "--out", run)
        lines = (run / "errors.csv").read_text().splitlines()
        assert len(lines) == 4
        cells = {cell for line in lines[1:] for cell in line.split(",")[1:]}
        assert cells == {"0.0"}

    def test_everything_baseline_flows_through_evaluate(self, workspace):
        config, data, run = workspace
        base = run.parent / "baseline"
        run_ok(MODEL_RUNNER, "segment", "--images", data, "--everything", "--seed", "4",
               "--out", base)
        run_ok(CAPSEG, "evaluate", "--config", config, "--dataset", data,
               "--masks", base / "masks.json", "--detections", base / "detections.json",
               "--out", base)
        doc = json.loads((base / "evaluation.json").read_text())
        prompted = 1.0
        baseline = doc["summary"]["f1@0.5"]
        assert 0.0 < baseline < prompted

    def test_detect_rerun_is_byte_identical(self, workspace):
        _, data, run = workspace
        again = run.parent / "again"
        run_ok(MODEL_RUNNER, "detect", "--images", data, "--out", again, "--deterministic")
        assert (again / "detections.json").read_bytes() == (
            run / "detections.json"
        ).read_bytes()


def test_interpreter_consistency():
    """Both console scripts resolve inside this interpreter's environment."""
    proc = subprocess.run(
        [sys.executable, "-c", "import model_runner; print(model_runner.__version__)"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
