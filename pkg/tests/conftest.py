import numpy as np
import pytest

from endlessloop.raster import BinaryMask, RasterImage


def make_stripes(width=240, height=160, period=20.0, phase=0.0, angle_deg=0.0):
    """Periodic stripe image: pattern varies along `angle_deg`, constant across.

    Uses two harmonics so adjacent columns are distinguishable, and channel
    ramps so descriptors carry color structure.
    """
    xs, ys = np.meshgrid(np.arange(width, dtype=np.float64),
                         np.arange(height, dtype=np.float64))
    a = np.deg2rad(angle_deg)
    t = xs * np.cos(a) + ys * np.sin(a) + phase
    v = 0.5 + 0.32 * np.sin(2 * np.pi * t / period) + 0.13 * np.sin(6 * np.pi * t / period + 1.0)
    img = np.stack([v, v * 0.8 + 0.1, v * 0.55 + 0.25], axis=2)
    return RasterImage(np.clip(img, 0.0, 1.0))


def rect_mask(width, height, x0, y0, x1, y1):
    m = np.zeros((height, width), dtype=bool)
    m[y0:y1, x0:x1] = True
    return BinaryMask(m)


def add_salt_pepper(image: RasterImage, fraction=0.1, seed=7):
    rng = np.random.default_rng(seed)
    data = image.data.copy()
    hits = rng.random(data.shape[:2]) < fraction
    data[hits] = rng.choice([0.0, 1.0], size=(int(hits.sum()), 1))
    return RasterImage(data)


def make_lattice(width=260, height=200, px=16, py=40, dot=3, seed=3):
    """Dot lattice: rows carry well-separated brightness levels plus a tiny
    per-dot jitter, so each dot's closest lookalike sits in its own row and
    matched pairs run along +x."""
    rng = np.random.default_rng(seed)
    img = np.full((height, width), 0.08)
    rows = list(range(py // 2, height - py // 2, py))
    for r, cy in enumerate(rows):
        level = 0.35 + 0.55 * r / max(1, len(rows) - 1)
        for cx in range(px // 2, width - px // 2, px):
            value = level + 0.02 * (rng.random() - 0.5)
            img[cy - dot : cy + dot + 1, cx - dot : cx + dot + 1] = value
    rgb = np.stack([img, img, img], axis=2)
    return RasterImage(np.clip(rgb, 0, 1))


@pytest.fixture
def stripes20():
    return make_stripes(period=20.0)


@pytest.fixture
def small_mask():
    return rect_mask(240, 160, 24, 16, 216, 144)
