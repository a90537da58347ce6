"""Image preprocessing for 16-bit grayscale micrographs.

The adaptive local Wiener filter estimates a per-pixel mean and variance
in a 3x3 neighborhood (edges replicated) and attenuates each pixel's
deviation from the local mean by how much the local variance exceeds the
noise floor:

    out = mean + max(0, var - noise) / max(var, noise) * (x - mean)

Flat regions collapse to their mean; structure passes through. When no
noise variance is given, the average local variance of the image is
used, which is the classic adaptive choice. A constant image is returned
bit-identical: its local variance is zero everywhere, so the gain is
defined to be zero and the output equals the local mean equals the input.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy import ndimage

__all__ = ["wiener3x3", "contrast_stretch", "preprocess_image"]

_U16_MAX = 65535


def _to_u16(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, _U16_MAX).astype(np.uint16)


def wiener3x3(image: np.ndarray, noise_var: float | None = None) -> np.ndarray:
    """Adaptive 3x3 Wiener filter; input any integer/float 2D array, output uint16."""
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {x.shape}")
    if min(x.shape) < 3:
        raise ValueError(f"image must be at least 3x3 for a 3x3 filter, got {x.shape}")
    mean = ndimage.uniform_filter(x, size=3, mode="nearest")
    sq_mean = ndimage.uniform_filter(x * x, size=3, mode="nearest")
    var = np.maximum(sq_mean - mean * mean, 0.0)
    noise = float(var.mean()) if noise_var is None else float(noise_var)
    if noise < 0:
        raise ValueError(f"noise variance must be >= 0, got {noise}")
    denom = np.maximum(var, noise)
    gain = np.where(denom > 0, np.maximum(var - noise, 0.0) / np.where(denom > 0, denom, 1.0), 0.0)
    return _to_u16(mean + gain * (x - mean))


def contrast_stretch(
    image: np.ndarray, low_pct: float = 1.0, high_pct: float = 99.0
) -> np.ndarray:
    """Linear percentile stretch to the full uint16 range.

    Values at or below the ``low_pct`` percentile map to 0, at or above
    ``high_pct`` to 65535. An image with no contrast between the two
    percentiles cannot be stretched; it is returned unchanged with a
    warning.
    """
    if not 0.0 <= low_pct < high_pct <= 100.0:
        raise ValueError(f"need 0 <= low < high <= 100, got {low_pct}, {high_pct}")
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {x.shape}")
    lo, hi = np.percentile(x, [low_pct, high_pct])
    if hi == lo:
        warnings.warn(
            "contrast stretch skipped: percentiles are equal", RuntimeWarning, stacklevel=2
        )
        return _to_u16(x)
    return _to_u16((x - lo) / (hi - lo) * _U16_MAX)


def preprocess_image(
    image: np.ndarray,
    noise_var: float | None = None,
    low_pct: float = 1.0,
    high_pct: float = 99.0,
) -> np.ndarray:
    """Standard chain: Wiener denoise, then percentile contrast stretch."""
    return contrast_stretch(wiener3x3(image, noise_var), low_pct, high_pct)
