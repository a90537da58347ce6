"""Shared helpers: tiny mask builders used across the suite."""

from __future__ import annotations

import numpy as np
import pytest

from capseg import Category, InstanceMask


def rect_mask(height, width, y0, x0, h, w):
    """Boolean (height, width) mask with a filled rectangle."""
    m = np.zeros((height, width), dtype=bool)
    m[y0 : y0 + h, x0 : x0 + w] = True
    return m


def instance(mask, category=Category.CM, score=1.0, inst_id=0):
    return InstanceMask(mask=mask, category=category, score=score, id=inst_id)


@pytest.fixture
def square20():
    """20x20 filled square at the origin of a 40x40 frame."""
    return rect_mask(40, 40, 0, 0, 20, 20)
