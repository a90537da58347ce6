"""Run configuration: one nested JSON document controlling every stage.

The schema is strict: unknown keys are rejected, values are type-checked,
and the fully resolved configuration is logged (and serializable) so any
run can be reproduced from its log line. The environment variable
``CAPSEG_SEED`` overrides the master seed, which is the one hook for
sweeping seeds without editing files.

Replication protocols live in configuration too: ``seeds`` lists the
master seeds for a repeated-run experiment (five by default), and a
driver replays the pipeline once per entry instead of hardcoding the
run count anywhere.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .backends import DegradationSpec
from .capillary import AreaMode, ErrorAggregation
from .evaluation import EvalMode, iou_thresholds
from .prompts import PromptMode
from .synth import SceneSpec

__all__ = ["ConfigError", "PreprocessConfig", "RunConfig", "load_config"]

SEED_ENV_VAR = "CAPSEG_SEED"


class ConfigError(ValueError):
    """The configuration document is malformed; message names the key."""


@dataclass(frozen=True)
class PreprocessConfig:
    enabled: bool = False
    noise_var: float | None = None
    low_pct: float = 1.0
    high_pct: float = 99.0


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    jobs: int = 1
    scenes: int = 8
    prompt_mode: PromptMode = PromptMode.BOX_AND_POINTS
    eval_mode: EvalMode = EvalMode.PER_IMAGE
    thresholds: str = "range"
    area_mode: AreaMode = AreaMode.PER_INSTANCE
    error_aggregation: ErrorAggregation = ErrorAggregation.MEAN_ABS
    alpha: float = 0.05
    detector: str = "oracle"
    segmenter: str = "clip"
    scene: SceneSpec = field(default_factory=SceneSpec)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    degradation: DegradationSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if not self.seeds or not all(
            isinstance(s, int) and not isinstance(s, bool) for s in self.seeds
        ):
            raise ConfigError(f"seeds must be a non-empty list of integers, got {self.seeds!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.scenes < 1:
            raise ConfigError("scenes must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie strictly between 0 and 1")
        if self.detector not in ("oracle", "file"):
            raise ConfigError(f"detector must be 'oracle' or 'file', got {self.detector!r}")
        if self.segmenter not in ("clip", "degraded", "file"):
            raise ConfigError(
                f"segmenter must be 'clip', 'degraded' or 'file', got {self.segmenter!r}"
            )
        self.resolved_thresholds()  # validate the spec string eagerly

    def resolved_thresholds(self) -> tuple[float, ...]:
        """Parse the threshold spec: 'range' or a comma-separated list."""
        if self.thresholds == "range":
            return iou_thresholds()
        try:
            values = tuple(float(v) for v in self.thresholds.split(","))
        except ValueError:
            raise ConfigError(f"bad threshold spec {self.thresholds!r}") from None
        if not values or not all(0.0 < v <= 1.0 for v in values):
            raise ConfigError(f"thresholds must lie in (0, 1], got {self.thresholds!r}")
        return values

    def to_dict(self) -> dict:
        """Nested plain-data form, stable key order, for logging and round-trips."""
        degradation = None
        if self.degradation is not None:
            degradation = {
                "erode_px": self.degradation.erode_px,
                "dilate_px": self.degradation.dilate_px,
                "shift": list(self.degradation.shift),
                "flip_prob": self.degradation.flip_prob,
                "seed": self.degradation.seed,
            }
        return {
            "seed": self.seed,
            "seeds": list(self.seeds),
            "jobs": self.jobs,
            "scenes": self.scenes,
            "prompt": {"mode": self.prompt_mode.value},
            "eval": {"mode": self.eval_mode.value, "thresholds": self.thresholds},
            "quantify": {
                "area_mode": self.area_mode.value,
                "aggregation": self.error_aggregation.value,
            },
            "stats": {"alpha": self.alpha},
            "backend": {"detector": self.detector, "segmenter": self.segmenter},
            "scene": {
                "width": self.scene.width,
                "height": self.scene.height,
                "cm_count_range": list(self.scene.cm_count_range),
                "capillaries_per_cm_range": list(self.scene.capillaries_per_cm_range),
                "membrane_thickness_px": self.scene.membrane_thickness_px,
                "relaxation_iters": self.scene.relaxation_iters,
                "seed": self.scene.seed,
                "membrane_bright_level": self.scene.membrane_bright_level,
                "interior_level": self.scene.interior_level,
                "noise_sd": self.scene.noise_sd,
            },
            "preprocess": {
                "enabled": self.preprocess.enabled,
                "noise_var": self.preprocess.noise_var,
                "low_pct": self.preprocess.low_pct,
                "high_pct": self.preprocess.high_pct,
            },
            "degradation": degradation,
        }


def _section(raw: Mapping, name: str) -> Mapping:
    value = raw.get(name, {})
    if not isinstance(value, Mapping):
        raise ConfigError(f"{name}: expected an object")
    return value


def _reject_unknown(section: Mapping, name: str, allowed: set[str]) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")


def _pick_int(section: Mapping, where: str, key: str, default: int) -> int:
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}.{key}: expected an integer, got {value!r}")
    return value


def _pick_real(section: Mapping, where: str, key: str, default: float) -> float:
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    return float(value)


def _pick_enum(section: Mapping, where: str, key: str, enum_cls, default):
    value = section.get(key)
    if value is None:
        return default
    for member in enum_cls:
        if member.value == value:
            return member
    choices = [m.value for m in enum_cls]
    raise ConfigError(f"{where}.{key}: expected one of {choices}, got {value!r}")


def _pick_pair(section: Mapping, where: str, key: str, default: tuple[int, int]) -> tuple[int, int]:
    value = section.get(key)
    if value is None:
        return default
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise ConfigError(f"{where}.{key}: expected a pair of integers, got {value!r}")
    return (value[0], value[1])


def config_from_dict(raw: Mapping) -> RunConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("configuration must be a JSON object")
    _reject_unknown(
        raw,
        "config",
        {
            "seed",
            "seeds",
            "jobs",
            "scenes",
            "prompt",
            "eval",
            "quantify",
            "stats",
            "backend",
            "scene",
            "preprocess",
            "degradation",
        },
    )
    prompt = _section(raw, "prompt")
    _reject_unknown(prompt, "prompt", {"mode"})
    eval_sec = _section(raw, "eval")
    _reject_unknown(eval_sec, "eval", {"mode", "thresholds"})
    quantify = _section(raw, "quantify")
    _reject_unknown(quantify, "quantify", {"area_mode", "aggregation"})
    stats_sec = _section(raw, "stats")
    _reject_unknown(stats_sec, "stats", {"alpha"})
    backend = _section(raw, "backend")
    _reject_unknown(backend, "backend", {"detector", "segmenter"})
    scene_sec = _section(raw, "scene")
    _reject_unknown(
        scene_sec,
        "scene",
        {
            "width",
            "height",
            "cm_count_range",
            "capillaries_per_cm_range",
            "membrane_thickness_px",
            "relaxation_iters",
            "seed",
            "membrane_bright_level",
            "interior_level",
            "noise_sd",
        },
    )
    pre_sec = _section(raw, "preprocess")
    _reject_unknown(pre_sec, "preprocess", {"enabled", "noise_var", "low_pct", "high_pct"})

    thresholds = eval_sec.get("thresholds", "range")
    if not isinstance(thresholds, str):
        raise ConfigError("eval.thresholds: expected a string spec such as 'range' or '0.5,0.75'")

    seeds = raw.get("seeds", (0, 1, 2, 3, 4))
    if not isinstance(seeds, (list, tuple)):
        raise ConfigError(f"seeds: expected a list of integers, got {seeds!r}")

    detector = backend.get("detector", "oracle")
    segmenter = backend.get("segmenter", "clip")
    if not isinstance(detector, str) or not isinstance(segmenter, str):
        raise ConfigError("backend.detector / backend.segmenter must be strings")

    enabled = pre_sec.get("enabled", False)
    if not isinstance(enabled, bool):
        raise ConfigError("preprocess.enabled: expected true or false")
    noise_var = pre_sec.get("noise_var")
    if noise_var is not None and (
        isinstance(noise_var, bool) or not isinstance(noise_var, (int, float))
    ):
        raise ConfigError(f"preprocess.noise_var: expected a number or null, got {noise_var!r}")

    degradation = None
    deg_sec = raw.get("degradation")
    if deg_sec is not None:
        if not isinstance(deg_sec, Mapping):
            raise ConfigError("degradation: expected an object or null")
        _reject_unknown(
            deg_sec, "degradation", {"erode_px", "dilate_px", "shift", "flip_prob", "seed"}
        )
        shift = deg_sec.get("shift", (0, 0))
        if (
            not isinstance(shift, (list, tuple))
            or len(shift) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in shift)
        ):
            raise ConfigError(f"degradation.shift: expected a pair of integers, got {shift!r}")
        try:
            degradation = DegradationSpec(
                erode_px=_pick_int(deg_sec, "degradation", "erode_px", 0),
                dilate_px=_pick_int(deg_sec, "degradation", "dilate_px", 0),
                shift=(shift[0], shift[1]),
                flip_prob=_pick_real(deg_sec, "degradation", "flip_prob", 0.0),
                seed=_pick_int(deg_sec, "degradation", "seed", 0),
            )
        except ValueError as exc:
            raise ConfigError(f"degradation: {exc}") from exc

    try:
        scene = SceneSpec(
            width=_pick_int(scene_sec, "scene", "width", 256),
            height=_pick_int(scene_sec, "scene", "height", 256),
            cm_count_range=_pick_pair(scene_sec, "scene", "cm_count_range", (6, 10)),
            capillaries_per_cm_range=_pick_pair(
                scene_sec, "scene", "capillaries_per_cm_range", (2, 4)
            ),
            membrane_thickness_px=_pick_int(scene_sec, "scene", "membrane_thickness_px", 3),
            relaxation_iters=_pick_int(scene_sec, "scene", "relaxation_iters", 1),
            seed=_pick_int(scene_sec, "scene", "seed", 0),
            membrane_bright_level=_pick_int(scene_sec, "scene", "membrane_bright_level", 52000),
            interior_level=_pick_int(scene_sec, "scene", "interior_level", 12000),
            noise_sd=_pick_real(scene_sec, "scene", "noise_sd", 1200.0),
        )
    except ValueError as exc:
        raise ConfigError(f"scene: {exc}") from exc

    try:
        return RunConfig(
            seed=_pick_int(raw, "config", "seed", 0),
            seeds=tuple(seeds),
            jobs=_pick_int(raw, "config", "jobs", 1),
            scenes=_pick_int(raw, "config", "scenes", 8),
            prompt_mode=_pick_enum(prompt, "prompt", "mode", PromptMode, PromptMode.BOX_AND_POINTS),
            eval_mode=_pick_enum(eval_sec, "eval", "mode", EvalMode, EvalMode.PER_IMAGE),
            thresholds=thresholds,
            area_mode=_pick_enum(
                quantify, "quantify", "area_mode", AreaMode, AreaMode.PER_INSTANCE
            ),
            error_aggregation=_pick_enum(
                quantify, "quantify", "aggregation", ErrorAggregation, ErrorAggregation.MEAN_ABS
            ),
            alpha=_pick_real(stats_sec, "stats", "alpha", 0.05),
            detector=detector,
            segmenter=segmenter,
            scene=scene,
            preprocess=PreprocessConfig(
                enabled=enabled,
                noise_var=None if noise_var is None else float(noise_var),
                low_pct=_pick_real(pre_sec, "preprocess", "low_pct", 1.0),
                high_pct=_pick_real(pre_sec, "preprocess", "high_pct", 99.0),
            ),
            degradation=degradation,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None = None, seed_override: int | None = None) -> RunConfig:
    """Load configuration, apply ``CAPSEG_SEED`` and an explicit seed override.

    Precedence: explicit override > environment variable > file > default.
    """
    if path is None:
        config = RunConfig()
    else:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
        config = config_from_dict(raw)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            config = replace(config, seed=int(env_seed))
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from None
    if seed_override is not None:
        config = replace(config, seed=seed_override)
    return config
