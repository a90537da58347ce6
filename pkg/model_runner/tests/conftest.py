"""Shared fixtures: tiny hand-built scenes with exactly known pixels.

The scenes imitate the input contract (bright boundaries around dim
objects, 16-bit grayscale) with plain rectangles so every expected area,
box, and mask is readable off the constructor calls. No randomness and no
imports from the core package.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from PIL import Image

BRIGHT = 52000
DIM = 12000


def blank(height: int, width: int) -> np.ndarray:
    """All-bright canvas, the background every object is carved into."""
    return np.full((height, width), BRIGHT, dtype=np.uint16)


def carve_rect(image: np.ndarray, y: int, x: int, h: int, w: int) -> None:
    """One dim rectangular object; its pixels are the expected mask."""
    image[y : y + h, x : x + w] = DIM


def carve_ringed_rect(image: np.ndarray, y: int, x: int, h: int, w: int) -> None:
    """A dim core at (y, x, h, w) ringed by bright orthogonal neighbors.

    Models a small vessel inside a larger object: the rim is one pixel of
    bright cross-neighbors, so its diagonal corners stay dim. Under
    4-connectivity the core is its own region; under 8-connectivity it
    still touches the surround through those corners.
    """
    ring = np.zeros(image.shape, dtype=bool)
    ring[y : y + h, x - 1] = ring[y : y + h, x + w] = True
    ring[y - 1, x : x + w] = ring[y + h, x : x + w] = True
    image[ring] = BRIGHT
    image[y : y + h, x : x + w] = DIM


def save_png(image: np.ndarray, path: Path) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint16)).save(str(path), format="PNG")


@pytest.fixture
def image_dir(tmp_path):
    """Empty directory for PNG inputs."""
    d = tmp_path / "imgs"
    d.mkdir()
    return d


@pytest.fixture
def two_cells_two_caps(image_dir):
    """One 64x64 image, id 7: two large cells and two small vessels.

    Raster order of first pixels: cell A (4,4) 20x20, cap C (8,30) 4x4,
    cell B (30,28) 24x22, cap D (40,6) 3x5. Areas 400, 16, 528, 15.
    """
    img = blank(64, 64)
    carve_rect(img, 4, 4, 20, 20)
    carve_rect(img, 8, 30, 4, 4)
    carve_rect(img, 30, 28, 24, 22)
    carve_rect(img, 40, 6, 3, 5)
    save_png(img, image_dir / "7.png")
    return image_dir
