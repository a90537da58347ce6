"""Input image discovery and loading.

The runner takes a directory of 16-bit single-channel PNG files named
``<id>.png``, the layout the core pipeline writes next to ``dataset.json``.
The numeric stem is the image id every interchange record refers to; a PNG
whose stem is not an integer is an error rather than a silent skip, because
its pixels would otherwise be dropped from the run. Non-PNG entries such as
``dataset.json`` are ignored.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

__all__ = ["RunnerError", "scan_image_dir", "load_image"]


class RunnerError(RuntimeError):
    """Invalid runner input outside the checkpoint and schema contracts."""


def scan_image_dir(path: str | Path) -> dict[int, Path]:
    """Map image id to PNG path for every image in the directory.

    Returns an empty mapping for a directory with no PNG files.
    """
    root = Path(path)
    found: dict[int, Path] = {}
    bad: list[str] = []
    for entry in sorted(root.iterdir()):
        if not entry.is_file() or entry.suffix.lower() != ".png":
            continue
        try:
            image_id = int(entry.stem)
        except ValueError:
            bad.append(entry.name)
            continue
        found[image_id] = entry
    if bad:
        raise RunnerError(
            f"{root}: cannot derive integer image ids from: {', '.join(bad)}"
        )
    return dict(sorted(found.items()))


def load_image(path: str | Path) -> np.ndarray:
    """Load one PNG as a 2D uint16 array."""
    try:
        with Image.open(str(path)) as img:
            arr = np.array(img)
    except OSError as exc:
        raise RunnerError(f"{path}: cannot read image: {exc}") from exc
    if arr.ndim != 2:
        raise RunnerError(f"{path}: expected single-channel grayscale, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise RunnerError(f"{path}: expected integer samples, got dtype {arr.dtype}")
    if arr.min() < 0 or arr.max() > 65535:
        raise RunnerError(f"{path}: samples exceed 16-bit range")
    return arr.astype(np.uint16)
