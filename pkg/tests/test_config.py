"""Configuration schema: strict keys, typed values, seed precedence."""

import json

import pytest

from capseg import (
    AreaMode,
    ConfigError,
    ErrorAggregation,
    EvalMode,
    PromptMode,
    RunConfig,
    config_from_dict,
    iou_thresholds,
    load_config,
)


class TestDefaults:
    def test_default_values(self):
        config = RunConfig()
        assert config.seed == 0
        assert config.seeds == (0, 1, 2, 3, 4)
        assert config.jobs == 1
        assert config.scenes == 8
        assert config.prompt_mode is PromptMode.BOX_AND_POINTS
        assert config.eval_mode is EvalMode.PER_IMAGE
        assert config.thresholds == "range"
        assert config.area_mode is AreaMode.PER_INSTANCE
        assert config.error_aggregation is ErrorAggregation.MEAN_ABS
        assert config.alpha == 0.05
        assert (config.detector, config.segmenter) == ("oracle", "clip")
        assert config.degradation is None

    def test_empty_document_is_defaults(self):
        assert config_from_dict({}) == RunConfig()


class TestValidation:
    def test_jobs_and_scenes_bounds(self):
        with pytest.raises(ConfigError, match="jobs must be >= 1"):
            RunConfig(jobs=0)
        with pytest.raises(ConfigError, match="scenes must be >= 1"):
            RunConfig(scenes=0)

    def test_alpha_open_interval(self):
        with pytest.raises(ConfigError, match="alpha"):
            RunConfig(alpha=0.0)
        with pytest.raises(ConfigError, match="alpha"):
            RunConfig(alpha=1.0)

    def test_backend_names(self):
        with pytest.raises(ConfigError, match="detector"):
            RunConfig(detector="neural")
        with pytest.raises(ConfigError, match="segmenter"):
            RunConfig(segmenter="magic")

    def test_seeds_list(self):
        assert RunConfig(seeds=[7, 3]).seeds == (7, 3)
        with pytest.raises(ConfigError, match="seeds must be a non-empty list"):
            RunConfig(seeds=())
        with pytest.raises(ConfigError, match="seeds must be a non-empty list"):
            RunConfig(seeds=(1, "two"))
        with pytest.raises(ConfigError, match="seeds must be a non-empty list"):
            RunConfig(seeds=(True, 2))


class TestThresholds:
    def test_range_resolves_to_coco_grid(self):
        assert RunConfig(thresholds="range").resolved_thresholds() == iou_thresholds()

    def test_comma_list(self):
        assert RunConfig(thresholds="0.5,0.75").resolved_thresholds() == (0.5, 0.75)
        assert RunConfig(thresholds="0.6").resolved_thresholds() == (0.6,)

    def test_bad_specs_rejected_eagerly(self):
        with pytest.raises(ConfigError, match="bad threshold spec"):
            RunConfig(thresholds="half")
        with pytest.raises(ConfigError, match="lie in"):
            RunConfig(thresholds="0.5,1.5")
        with pytest.raises(ConfigError, match="lie in"):
            RunConfig(thresholds="0")


class TestStrictSchema:
    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match=r"config: unknown keys \['sceness'\]"):
            config_from_dict({"sceness": 3})

    def test_unknown_section_key(self):
        with pytest.raises(ConfigError, match=r"eval: unknown keys \['iou'\]"):
            config_from_dict({"eval": {"iou": 0.5}})
        with pytest.raises(ConfigError, match=r"scene: unknown keys"):
            config_from_dict({"scene": {"cells": 5}})
        with pytest.raises(ConfigError, match=r"degradation: unknown keys"):
            config_from_dict({"degradation": {"blur": 2}})

    def test_type_errors_name_the_key(self):
        with pytest.raises(ConfigError, match="config.seed: expected an integer"):
            config_from_dict({"seed": "zero"})
        with pytest.raises(ConfigError, match="stats.alpha: expected a number"):
            config_from_dict({"stats": {"alpha": "small"}})
        with pytest.raises(ConfigError, match="prompt.mode: expected one of"):
            config_from_dict({"prompt": {"mode": "points_and_box"}})
        with pytest.raises(ConfigError, match="scene.cm_count_range: expected a pair"):
            config_from_dict({"scene": {"cm_count_range": [4]}})
        with pytest.raises(ConfigError, match="preprocess.enabled"):
            config_from_dict({"preprocess": {"enabled": "yes"}})

    def test_bool_is_not_an_integer(self):
        with pytest.raises(ConfigError, match="config.jobs: expected an integer"):
            config_from_dict({"jobs": True})

    def test_seeds_must_be_a_list(self):
        with pytest.raises(ConfigError, match="seeds: expected a list of integers"):
            config_from_dict({"seeds": "0,1,2"})


class TestSections:
    def test_nested_values_land_in_dataclasses(self):
        config = config_from_dict(
            {
                "seed": 9,
                "seeds": [11, 12, 13],
                "jobs": 4,
                "prompt": {"mode": "box_only"},
                "eval": {"mode": "pooled", "thresholds": "0.5"},
                "quantify": {"area_mode": "union", "aggregation": "mean_signed"},
                "stats": {"alpha": 0.01},
                "backend": {"detector": "file", "segmenter": "file"},
                "scene": {"width": 128, "height": 128, "cm_count_range": [3, 5]},
                "preprocess": {"enabled": True, "noise_var": 100.0},
                "degradation": {"dilate_px": 2, "shift": [3, 2], "flip_prob": 0.01, "seed": 5},
            }
        )
        assert config.seed == 9
        assert config.seeds == (11, 12, 13)
        assert config.prompt_mode is PromptMode.BOX_ONLY
        assert config.eval_mode is EvalMode.POOLED
        assert config.area_mode is AreaMode.UNION
        assert config.error_aggregation is ErrorAggregation.MEAN_SIGNED
        assert config.scene.width == 128
        assert config.scene.cm_count_range == (3, 5)
        assert config.preprocess.enabled
        assert config.degradation.dilate_px == 2
        assert config.degradation.shift == (3, 2)

    def test_to_dict_round_trips(self):
        config = config_from_dict(
            {
                "seed": 3,
                "eval": {"thresholds": "0.5,0.75"},
                "degradation": {"erode_px": 1, "seed": 2},
            }
        )
        assert config_from_dict(config.to_dict()) == config

    def test_to_dict_of_defaults_round_trips(self):
        config = RunConfig()
        assert config_from_dict(config.to_dict()) == config


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    def test_file_values_loaded(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 17, "scenes": 3}), encoding="utf-8")
        config = load_config(path)
        assert config.seed == 17
        assert config.scenes == 3

    def test_env_seed_overrides_file(self, tmp_path, monkeypatch):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 17}), encoding="utf-8")
        monkeypatch.setenv("CAPSEG_SEED", "99")
        assert load_config(path).seed == 99

    def test_explicit_override_beats_env(self, tmp_path, monkeypatch):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 17}), encoding="utf-8")
        monkeypatch.setenv("CAPSEG_SEED", "99")
        assert load_config(path, seed_override=5).seed == 5

    def test_env_seed_must_be_integer(self, monkeypatch):
        monkeypatch.setenv("CAPSEG_SEED", "lots")
        with pytest.raises(ConfigError, match="CAPSEG_SEED must be an integer"):
            load_config()

    def test_no_file_defaults(self, monkeypatch):
        monkeypatch.delenv("CAPSEG_SEED", raising=False)
        assert load_config() == RunConfig()
