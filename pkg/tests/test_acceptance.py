"""Acceptance gate: one test per shipped guarantee, one verdict line each.

Run with ``pytest tests/test_acceptance.py -v`` for the per-criterion
pass/fail report. Tolerances and time budgets are part of the contract
and are asserted, not just documented. Everything here goes through
public entry points only.
"""

import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from conftest import instance, rect_mask
from test_prompts import brute_force_prompts, random_detections
from test_stats import quad_two_tailed_p, t_test_p_from_statistic

from capseg import (
    Category,
    DegradationSpec,
    Measurements,
    PromptMode,
    RunConfig,
    evaluate,
    f1_from,
    generate_prompts,
    t_test,
)
from capseg import pipeline as stages
from capseg.cli import main

# Published benchmark means for five segmentation approaches, as
# (approach, threshold spec, mAP, mAR, F1) at 0.5, 0.75 and the
# 0.5:0.95 range. 15 rows x 3 values = 45 cells.
PUBLISHED_TABLE = [
    ("prompt-free baseline", "0.5", 0.141, 0.403, 0.209),
    ("prompt-free baseline", "0.75", 0.109, 0.331, 0.164),
    ("prompt-free baseline", "range", 0.106, 0.323, 0.159),
    ("points-only prompts", "0.5", 0.695, 0.756, 0.724),
    ("points-only prompts", "0.75", 0.475, 0.602, 0.531),
    ("points-only prompts", "range", 0.489, 0.596, 0.537),
    ("box-only prompts", "0.5", 0.807, 0.834, 0.820),
    ("box-only prompts", "0.75", 0.658, 0.734, 0.694),
    ("box-only prompts", "range", 0.634, 0.702, 0.665),
    ("end-to-end baseline", "0.5", 0.764, 0.781, 0.772),
    ("end-to-end baseline", "0.75", 0.701, 0.734, 0.717),
    ("end-to-end baseline", "range", 0.630, 0.667, 0.647),
    ("box-and-points prompts", "0.5", 0.824, 0.844, 0.834),
    ("box-and-points prompts", "0.75", 0.690, 0.756, 0.721),
    ("box-and-points prompts", "range", 0.653, 0.713, 0.680),
]


def test_published_f1_identity():
    """f1_from reproduces every published F1 cell within rounding slack."""
    started = time.perf_counter()
    for approach, spec, map_v, mar_v, f1_published in PUBLISHED_TABLE:
        f1 = f1_from(map_v, mar_v)
        assert abs(f1 - f1_published) <= 0.002, (approach, spec, f1, f1_published)
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    print(f"PASS: F1 identity on all 45 published cells within 0.002 ({elapsed:.3f}s)")


def test_oracle_pipeline_identity(tmp_path):
    """Oracle detector + box-and-points prompts + clip segmenter is exact."""
    started = time.perf_counter()
    config = RunConfig(scenes=20)
    stages.run_synth(config, tmp_path / "data")
    result = stages.run_pipeline(tmp_path / "data", config, tmp_path / "out")

    summary = result["evaluation"]["summary"]
    for spec in ("0.5", "0.75", "range"):
        for metric in ("map", "mar", "f1"):
            assert summary[f"{metric}@{spec}"] == 1.0

    lines = (tmp_path / "out" / "errors.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 21
    cells = {cell for line in lines[1:] for cell in line.split(",")[1:]}
    assert cells == {"0.0"}  # every relative error defined and exactly zero

    elapsed = time.perf_counter() - started
    assert elapsed < 10.0
    print(f"PASS: oracle pipeline exact on 20 scenes, all errors zero ({elapsed:.2f}s)")


def test_threshold_crossing_exactness():
    """A 0.6-IoU pair crosses the grid exactly where enumeration says."""
    truth = instance(rect_mask(40, 60, 10, 10, 20, 20))
    pred = instance(rect_mask(40, 60, 10, 15, 20, 20))  # overlap 300, union 500
    report = evaluate({1: [truth]}, {1: [pred]})
    assert report.map_at(0.5) == 1.0
    assert report.map_at(0.75) == 0.0
    assert report.map_range == 0.3
    print("PASS: 0.6-IoU fixture gives mAP 1.0 @0.5, 0.0 @0.75, 0.3 @range exactly")


def test_prompt_generator_oracle_equivalence():
    """1000 random scenes, every mode, against the double-loop oracle."""
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(1000):
        n = int(rng.integers(0, 51))
        detections = random_detections(rng, n)
        for mode in PromptMode:
            assert generate_prompts(detections, mode) == brute_force_prompts(detections, mode)
            checked += 1
    print(f"PASS: prompt generator matches the oracle on {checked} scene/mode pairs")


def test_ablation_ordering(tmp_path):
    """Box constraints recover clipping errors: points <= box <= box-and-points."""
    degradation = DegradationSpec(erode_px=0, dilate_px=2, shift=(3, 2), flip_prob=0.002, seed=5)
    base = RunConfig(scenes=6, seed=9, segmenter="degraded", degradation=degradation, thresholds="0.5")
    stages.run_synth(base, tmp_path / "data")
    scores = {}
    for mode in (PromptMode.POINTS_ONLY, PromptMode.BOX_ONLY, PromptMode.BOX_AND_POINTS):
        config = replace(base, prompt_mode=mode)
        result = stages.run_pipeline(tmp_path / "data", config, tmp_path / mode.value)
        scores[mode] = result["evaluation"]["summary"]["f1@0.5"]
    assert scores[PromptMode.POINTS_ONLY] <= scores[PromptMode.BOX_ONLY]
    assert scores[PromptMode.BOX_ONLY] <= scores[PromptMode.BOX_AND_POINTS]
    ordered = " <= ".join(f"{scores[m]:.4f}" for m in scores)
    print(f"PASS: ablation F1@0.5 ordering holds ({ordered})")


def test_capillarization_arithmetic():
    """Count/area fixture reproduces the three density ratios exactly."""
    m = Measurements(
        cm_count=4,
        cap_count=18,
        cm_area_um2=1200.0,
        cap_area_um2=36.0,
        fov_area_um2=42.5 * 42.5,
    )
    assert abs(m.cdfa - 18 / 1806.25) <= 1e-12
    assert abs(m.cdca - 0.015) <= 1e-12
    assert abs(m.ccr - 4.5) <= 1e-12
    print("PASS: capillarization ratios exact to 1e-12 on the count fixture")


def test_statistics_quadrature_agreement():
    """Engine p-values against numeric integration of the t density."""
    worst = 0.0
    for df in (1, 2, 3, 5, 8, 20, 100):
        for t in (0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0):
            p_engine = t_test_p_from_statistic(t, df)
            p_quad = quad_two_tailed_p(t, df)
            worst = max(worst, abs(p_engine - p_quad))
    assert worst <= 1e-9

    sample = [1.3, 2.1, 3.4, 0.7]
    assert t_test(sample, list(sample)).p_value == 1.0
    assert t_test(sample, list(sample), paired=True).p_value == 1.0
    print(f"PASS: p-values within {worst:.2e} of quadrature; identical samples give p = 1")


def test_pipeline_determinism(tmp_path):
    """The pipeline subcommand run twice is bit-identical, file for file."""
    config = tmp_path / "config.json"
    config.write_text(
        json.dumps(
            {
                "scenes": 4,
                "scene": {
                    "width": 128,
                    "height": 128,
                    "cm_count_range": [4, 6],
                    "capillaries_per_cm_range": [1, 2],
                },
            }
        ),
        encoding="utf-8",
    )
    dataset = tmp_path / "data"
    assert main(["synth", "--config", str(config), "--seed", "3", "--out", str(dataset)]) == 0

    def run_once(out: Path) -> dict[str, bytes]:
        code = main(
            ["pipeline", "--config", str(config), "--seed", "3",
             "--dataset", str(dataset), "--out", str(out)]
        )
        assert code == 0
        return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.is_file()}

    first = run_once(tmp_path / "run1")
    second = run_once(tmp_path / "run2")
    assert first == second
    assert set(first) >= {"detections.json", "prompts.json", "masks.json", "evaluation.json",
                          "evaluation.csv", "report.csv", "errors.csv", "errors_summary.json"}
    print(f"PASS: pipeline rerun bit-identical across {len(first)} artifact files")
