"""Checkpoint files: the parameter sets the runner loads before inference.

A checkpoint is a JSON parameter file with a format tag, a version, an
architecture name, and a ``weights`` object. The reference backends shipped
with this package are classical region models, so their weights are a handful
of named scalars rather than tensors; the loading contract is the same one a
tensor-based backend would honour. Two checkpoints are packaged as defaults,
one per operation:

* ``detector-reference.json``: dark-object detector (binarize, connected
  components, size-based category rule, contrast-based confidence).
* ``segmenter-reference.json``: prompt-guided region selector (same region
  extraction, candidates scored against box and point prompts).

Any problem with a checkpoint, from a missing key to unparseable JSON,
raises :class:`CheckpointError` naming the file. Unknown weight keys are
rejected so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

__all__ = [
    "CheckpointError",
    "BinarizeSpec",
    "DetectorCheckpoint",
    "SegmenterCheckpoint",
    "load_checkpoint",
    "default_checkpoint_path",
]

_FORMAT_TAGS = {"detector": "model-runner/detector", "segmenter": "model-runner/segmenter"}
_ARCHS = {"detector": ("threshold-components",), "segmenter": ("region-proposals",)}
_VERSION = 1


class CheckpointError(RuntimeError):
    """A checkpoint file is missing, unreadable, or structurally invalid."""


@dataclass(frozen=True)
class BinarizeSpec:
    """How foreground pixels are split from background.

    ``otsu`` picks the threshold from the image histogram; ``fixed`` uses
    the stored 16-bit level. ``dark_objects`` polarity treats pixels at or
    below the threshold as foreground, ``bright_objects`` the reverse.
    """

    method: str = "otsu"
    threshold: int = 0
    polarity: str = "dark_objects"


@dataclass(frozen=True)
class DetectorCheckpoint:
    """Weights of the reference detector."""

    binarize: BinarizeSpec
    connectivity: int
    min_area_px: int
    cm_min_area_px: int
    contrast_gain: float
    size_margin_areas: float
    path: Path


@dataclass(frozen=True)
class SegmenterCheckpoint:
    """Weights of the reference prompt-guided segmenter."""

    binarize: BinarizeSpec
    connectivity: int
    min_area_px: int
    contrast_gain: float
    size_margin_areas: float
    box_weight: float
    point_weight: float
    negative_penalty: float
    path: Path


def default_checkpoint_path(kind: str) -> Path:
    """Filesystem path of the packaged reference checkpoint for ``kind``."""
    if kind not in _FORMAT_TAGS:
        raise ValueError(f"kind must be 'detector' or 'segmenter', got {kind!r}")
    return Path(str(resources.files("model_runner") / "data" / f"{kind}-reference.json"))


def _fail(path, reason: str) -> CheckpointError:
    return CheckpointError(f"checkpoint {path}: {reason}")


def _pop_number(weights: dict, path, key: str, *, integer: bool = False, minimum=None):
    if key not in weights:
        raise _fail(path, f"weights missing key '{key}'")
    value = weights.pop(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(path, f"weights['{key}'] must be a number, got {value!r}")
    if integer:
        if not isinstance(value, int):
            raise _fail(path, f"weights['{key}'] must be an integer, got {value!r}")
    else:
        value = float(value)
    if minimum is not None and value < minimum:
        raise _fail(path, f"weights['{key}'] must be >= {minimum}, got {value}")
    return value


def _pop_binarize(weights: dict, path) -> BinarizeSpec:
    polarity = weights.pop("polarity", "dark_objects")
    if polarity not in ("dark_objects", "bright_objects"):
        raise _fail(path, f"weights['polarity'] must name a polarity, got {polarity!r}")
    spec = weights.pop("binarize", None)
    if not isinstance(spec, dict):
        raise _fail(path, "weights missing 'binarize' object")
    method = spec.get("method")
    if method == "otsu":
        extra = set(spec) - {"method"}
    elif method == "fixed":
        threshold = spec.get("threshold")
        if not isinstance(threshold, int) or isinstance(threshold, bool):
            raise _fail(path, "fixed binarize needs an integer 'threshold'")
        if not 0 <= threshold <= 65535:
            raise _fail(path, f"binarize threshold must be a 16-bit level, got {threshold}")
        extra = set(spec) - {"method", "threshold"}
        return BinarizeSpec(method="fixed", threshold=threshold, polarity=polarity)
    else:
        raise _fail(path, f"binarize method must be 'otsu' or 'fixed', got {method!r}")
    if extra:
        raise _fail(path, f"binarize has unknown keys: {sorted(extra)}")
    return BinarizeSpec(method="otsu", polarity=polarity)


def load_checkpoint(path: str | Path, kind: str):
    """Parse and validate a checkpoint file for the given operation.

    Returns a :class:`DetectorCheckpoint` or :class:`SegmenterCheckpoint`.
    Raises :class:`CheckpointError` on any defect; the message always names
    the offending file so a failed load is diagnosable from the exit message.
    """
    if kind not in _FORMAT_TAGS:
        raise ValueError(f"kind must be 'detector' or 'segmenter', got {kind!r}")
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise _fail(path, f"cannot read: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _fail(path, f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise _fail(path, "top level must be an object")
    if raw.get("format") != _FORMAT_TAGS[kind]:
        raise _fail(
            path,
            f"format tag {raw.get('format')!r} does not match expected "
            f"{_FORMAT_TAGS[kind]!r}",
        )
    if raw.get("version") != _VERSION:
        raise _fail(path, f"unsupported version {raw.get('version')!r}, expected {_VERSION}")
    if raw.get("arch") not in _ARCHS[kind]:
        raise _fail(path, f"unknown arch {raw.get('arch')!r} for a {kind} checkpoint")
    weights = raw.get("weights")
    if not isinstance(weights, dict):
        raise _fail(path, "missing 'weights' object")
    weights = dict(weights)

    binarize = _pop_binarize(weights, path)
    connectivity = _pop_number(weights, path, "connectivity", integer=True, minimum=4)
    if connectivity not in (4, 8):
        raise _fail(path, f"weights['connectivity'] must be 4 or 8, got {connectivity}")
    min_area = _pop_number(weights, path, "min_area_px", integer=True, minimum=1)
    gain = _pop_number(weights, path, "contrast_gain", minimum=0.0)
    margin = _pop_number(weights, path, "size_margin_areas", minimum=1.0)
    if kind == "detector":
        cm_min = _pop_number(weights, path, "cm_min_area_px", integer=True, minimum=1)
        if cm_min <= min_area:
            raise _fail(path, "cm_min_area_px must exceed min_area_px")
        if weights:
            raise _fail(path, f"weights has unknown keys: {sorted(weights)}")
        return DetectorCheckpoint(
            binarize=binarize,
            connectivity=connectivity,
            min_area_px=min_area,
            cm_min_area_px=cm_min,
            contrast_gain=gain,
            size_margin_areas=margin,
            path=path,
        )
    box_w = _pop_number(weights, path, "box_weight", minimum=0.0)
    point_w = _pop_number(weights, path, "point_weight", minimum=0.0)
    neg = _pop_number(weights, path, "negative_penalty", minimum=0.0)
    if weights:
        raise _fail(path, f"weights has unknown keys: {sorted(weights)}")
    return SegmenterCheckpoint(
        binarize=binarize,
        connectivity=connectivity,
        min_area_px=min_area,
        contrast_gain=gain,
        size_margin_areas=margin,
        box_weight=box_w,
        point_weight=point_w,
        negative_penalty=neg,
        path=path,
    )
