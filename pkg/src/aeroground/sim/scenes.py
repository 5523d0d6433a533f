"""Procedural overhead scenes: dark roads over textured ground."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

ROAD_LEVEL = 0.15
GROUND_RANGE = (0.45, 0.9)


def _curve(rng, width: int, height: int, n_points: int = 800) -> np.ndarray:
    """A smooth random path entering at one border and wandering across."""
    side = rng.integers(4)
    u = rng.uniform(0.1, 0.9)
    start = {
        0: (u * width, 0.0),
        1: (width - 1.0, u * height),
        2: (u * width, height - 1.0),
        3: (0.0, u * height),
    }[int(side)]
    heading = {0: np.pi / 2, 1: np.pi, 2: -np.pi / 2, 3: 0.0}[int(side)] + rng.uniform(-0.6, 0.6)
    length = 1.6 * max(width, height)
    t = np.linspace(0.0, 1.0, n_points)
    bend = np.zeros_like(t)
    for _ in range(3):
        bend += rng.uniform(-1.2, 1.2) * np.sin(2 * np.pi * rng.uniform(0.3, 1.5) * t + rng.uniform(0, 2 * np.pi))
    ang = heading + bend
    step = length / n_points
    xs = start[0] + np.cumsum(step * np.cos(ang))
    ys = start[1] + np.cumsum(step * np.sin(ang))
    return np.stack([xs, ys], axis=1)


def _rasterize(points: np.ndarray, width: int, height: int) -> np.ndarray:
    grid = np.zeros((height, width), dtype=bool)
    ix = np.rint(points[:, 0]).astype(int)
    iy = np.rint(points[:, 1]).astype(int)
    ok = (ix >= 0) & (ix < width) & (iy >= 0) & (iy < height)
    grid[iy[ok], ix[ok]] = True
    return grid


def road_mask(width: int, height: int, rng: np.random.Generator, n_roads: int = 4) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    for _ in range(n_roads):
        line = _rasterize(_curve(rng, width, height), width, height)
        if not line.any():
            continue
        dist = ndimage.distance_transform_edt(~line)
        mask |= dist <= rng.uniform(2.0, 7.0)
    if rng.random() < 0.7:
        # a ring road / roundabout
        cx, cy = rng.uniform(0.25, 0.75) * width, rng.uniform(0.25, 0.75) * height
        radius = rng.uniform(0.08, 0.2) * min(width, height)
        ys, xs = np.mgrid[0:height, 0:width]
        ring = np.abs(np.hypot(xs - cx, ys - cy) - radius)
        mask |= ring <= rng.uniform(2.0, 5.0)
    return mask


def ground_texture(width: int, height: int, rng: np.random.Generator) -> np.ndarray:
    coarse = ndimage.gaussian_filter(rng.standard_normal((height, width)), 12.0, mode="wrap")
    fine = ndimage.gaussian_filter(rng.standard_normal((height, width)), 2.5, mode="wrap")
    field = coarse / (coarse.std() + 1e-12) + 0.5 * fine / (fine.std() + 1e-12)
    field = (field - field.min()) / (np.ptp(field) + 1e-12)
    lo, hi = GROUND_RANGE
    tex = lo + (hi - lo) * field
    # a few flat-roofed blocks
    for _ in range(rng.integers(4, 10)):
        w = int(rng.integers(width // 20, width // 7))
        h = int(rng.integers(height // 20, height // 7))
        x0 = int(rng.integers(0, max(1, width - w)))
        y0 = int(rng.integers(0, max(1, height - h)))
        tex[y0 : y0 + h, x0 : x0 + w] = rng.uniform(lo, hi)
    return tex


def synthetic_scene(width: int, height: int | None = None, seed: int = 0, n_roads: int = 4):
    """Return ``(image, mask)``: intensities in [0, 1] and a boolean road mask.

    Roads sit at intensity ~0.15 while ground stays within [0.45, 0.9], so a
    threshold anywhere in between separates them.
    """
    height = width if height is None else height
    rng = np.random.default_rng(seed)
    mask = road_mask(width, height, rng, n_roads)
    image = ground_texture(width, height, rng)
    road_tex = ROAD_LEVEL + 0.03 * ndimage.gaussian_filter(rng.standard_normal((height, width)), 1.5)
    image = np.where(mask, road_tex, image)
    image = ndimage.gaussian_filter(image, 0.7)
    return np.clip(image, 0.0, 1.0), mask
