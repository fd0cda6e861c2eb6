"""Orthographic closest-hit depth images of a sphere or squares scene."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .bvh import bvh_closest_hit
from .geom import RaySeg

SHADE_NEAR = 255
SHADE_FAR = 55


def debug_render(scene, axis: int = 0, resolution: int = 128) -> np.ndarray:
    """(resolution, resolution) uint8 image looking down +``axis``.

    The view covers the scene's bounding box; rows follow axis ``(axis+2)%3``
    and columns ``(axis+1)%3``.  Hits shade from 255 (near face of the box) to
    55 (far face); background is 0.
    """
    img = np.zeros((resolution, resolution), np.uint8)
    if scene.bvh is None:
        return img
    box = scene.bvh.root_box
    lo = box.min.astype(np.float64)
    hi = box.max.astype(np.float64)
    u, v = (axis + 1) % 3, (axis + 2) % 3
    depth = hi[axis] - lo[axis]
    d = np.zeros(3, np.float32)
    d[axis] = 1.0
    us = lo[u] + (np.arange(resolution) + 0.5) * (hi[u] - lo[u]) / resolution
    vs = lo[v] + (np.arange(resolution) + 0.5) * (hi[v] - lo[v]) / resolution
    o = np.empty(3)
    o[axis] = lo[axis]
    for row, pv in enumerate(vs):
        for col, pu in enumerate(us):
            o[u], o[v] = pu, pv
            hit = bvh_closest_hit(scene.bvh, RaySeg(o, d, 0.0, depth), scene.intersect)
            if hit is not None:
                f = min(max(hit.t / depth, 0.0), 1.0) if depth > 0 else 0.0
                img[row, col] = round(SHADE_NEAR - f * (SHADE_NEAR - SHADE_FAR))
    return img


def write_pgm(path: str | Path, img: np.ndarray) -> None:
    img = np.asarray(img, np.uint8)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())
