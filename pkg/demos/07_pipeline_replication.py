"""
The full pipeline, replicated across seeds
==========================================

One command chains detect, prompt, segment, evaluate and quantify
through their file artifacts. Repeated-run experiments are driven by
the ``seeds`` list in the run configuration: replay the pipeline once
per seed, collect a score per run, then test whether two setups differ.
Nothing about the run count is hardcoded; edit the list to change it.
"""

import json
import tempfile
from pathlib import Path

from capseg import format_mean_sd, load_config, summarize, t_test
from capseg.cli import main

BASE = {
    "scenes": 4,
    "seeds": [0, 1, 2, 3, 4],
    "eval": {"thresholds": "0.5"},
    "backend": {"segmenter": "degraded"},
    "degradation": {"dilate_px": 2, "shift": [3, 2], "flip_prob": 0.002, "seed": 5},
    "scene": {
        "width": 128,
        "height": 128,
        "cm_count_range": [4, 6],
        "capillaries_per_cm_range": [1, 2],
    },
}


def f1_of_run(workdir: Path, config_path: Path, seed: int, mode: str) -> float:
    """Synthesize a dataset for the seed, run the pipeline, read back F1@0.5."""
    dataset = workdir / f"data_{seed}"
    out = workdir / f"{mode}_{seed}"
    assert main(["synth", "--config", str(config_path), "--seed", str(seed),
                 "--out", str(dataset)]) == 0
    assert main(["pipeline", "--config", str(config_path), "--seed", str(seed),
                 "--dataset", str(dataset), "--out", str(out)]) == 0
    doc = json.loads((out / "evaluation.json").read_text(encoding="utf-8"))
    return doc["summary"]["f1@0.5"]


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    scores = {}
    # On synthetic scenes the box alone already recovers most of the
    # inflicted degradation, so the telling contrast is points vs full.
    for mode in ("points_only", "box_and_points"):
        config_path = tmp / f"{mode}.json"
        config_path.write_text(
            json.dumps({**BASE, "prompt": {"mode": mode}}), encoding="utf-8"
        )
        seeds = load_config(config_path).seeds
        scores[mode] = [f1_of_run(tmp, config_path, seed, mode) for seed in seeds]

    print()
    for mode, values in scores.items():
        stats = summarize(values)
        print(f"{mode:>15}: F1@0.5 {format_mean_sd(stats.mean, stats.sd)} over {stats.n} seeds")
    result = t_test(scores["points_only"], scores["box_and_points"], paired=True)
    print(f"paired by seed: t={result.statistic:.3f}, df={result.df}, p={result.p_value:.2e}")
