import math

import numpy as np
import pytest

from spinecobb.raster import BinaryMask


def rotated_rect_mask(w, h, angle_deg, width=200, height=200, cx=None, cy=None):
    """Rasterise a w x h rectangle rotated counterclockwise (math frame) about its centre."""
    cx = (width - 1) / 2 if cx is None else cx
    cy = (height - 1) / 2 if cy is None else cy
    yy, xx = np.mgrid[0:height, 0:width]
    a = math.radians(angle_deg)
    dx, dy = xx - cx, -(yy - cy)
    u = dx * math.cos(a) + dy * math.sin(a)
    v = -dx * math.sin(a) + dy * math.cos(a)
    return BinaryMask((np.abs(u) <= w / 2) & (np.abs(v) <= h / 2))


def stacked_blocks(n, width=120, block_w=40, block_h=10, gap=6, top=4):
    """n axis-aligned blocks stacked vertically, well separated."""
    height = top * 2 + n * block_h + (n - 1) * gap
    g = np.zeros((height, width), dtype=bool)
    for i in range(n):
        y0 = top + i * (block_h + gap)
        g[y0:y0 + block_h, 10:10 + block_w] = True
    return BinaryMask(g)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
