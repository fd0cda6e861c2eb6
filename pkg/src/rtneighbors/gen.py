"""Workload generators: uniform unit box and unit-sphere surface.

Points are drawn with numpy's PCG64 (``numpy.random.default_rng(seed)``) in
float32.  Any point closer than ``2 * eps`` to an earlier point is redrawn
(up to ``MAX_RESAMPLE`` times), since the geometric encodings need that much
separation to stay exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .engine import DEFAULT_EPS_FACTOR, ProblemSpec
from .geom import Aabb

RNG_NAME = "numpy.PCG64"
BETAS = (2, 4, 8, 16, 32)
ALPHAS = (8, 16, 32, 64, 128)
PS = (1, 2, 4, 8, 16, 32)
MAX_RESAMPLE = 100
NEIGHBORS_PER_P = 9
UNIT_CUBE = Aabb((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


class SeparationError(RuntimeError):
    pass


@dataclass(frozen=True)
class UniformConfig:
    beta: int
    p: int
    seed: int = 0

    def __post_init__(self):
        if self.beta not in BETAS:
            raise ValueError(f"beta must be one of {BETAS}, got {self.beta}")
        if self.p not in PS:
            raise ValueError(f"p must be one of {PS}, got {self.p}")

    @property
    def n(self) -> int:
        return self.p * self.beta ** 3

    @property
    def cutoff(self) -> float:
        return 1.0 / self.beta


@dataclass(frozen=True)
class SurfaceConfig:
    alpha: int
    p: int
    seed: int = 0

    def __post_init__(self):
        if self.alpha not in ALPHAS:
            raise ValueError(f"alpha must be one of {ALPHAS}, got {self.alpha}")
        if self.p not in PS:
            raise ValueError(f"p must be one of {PS}, got {self.p}")

    @property
    def n(self) -> int:
        return self.p * self.alpha ** 3

    @property
    def cutoff(self) -> float:
        return surface_cutoff(self.n, NEIGHBORS_PER_P * self.p)


def surface_cutoff(n: int, expected: float) -> float:
    """Geodesic cap angle holding ``expected`` of ``n`` uniform points on average."""
    coef = min(1.0, max(-1.0, 1.0 - 2.0 * expected / n))
    return math.acos(coef)


SURFACE_BOUNDS = Aabb((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))


def _separate(pts: np.ndarray, min_dist: float, draw, rng) -> np.ndarray:
    """Redraw later points of any pair closer than ``min_dist`` (in place)."""
    for _ in range(MAX_RESAMPLE):
        pairs = cKDTree(pts.astype(np.float64)).query_pairs(min_dist, output_type="ndarray")
        if len(pairs) == 0:
            return pts
        bad = np.unique(pairs.max(axis=1))
        pts[bad] = draw(rng, len(bad))
    raise SeparationError(f"could not reach separation {min_dist} in {MAX_RESAMPLE} rounds")


def _draw_box(rng, n):
    return rng.random((n, 3), dtype=np.float32)


def _draw_sphere(rng, n):
    u = rng.random(n)
    v = rng.random(n)
    theta = 2.0 * np.pi * u
    phi = np.arccos(1.0 - 2.0 * v)
    s = np.sin(phi)
    return np.stack([s * np.cos(theta), s * np.sin(theta), np.cos(phi)], axis=1).astype(np.float32)


def gen_uniform(cfg: UniformConfig, eps_factor: float = DEFAULT_EPS_FACTOR) -> tuple[np.ndarray, float]:
    rng = np.random.default_rng(cfg.seed)
    c = cfg.cutoff
    pts = _separate(_draw_box(rng, cfg.n), 2 * c * eps_factor, _draw_box, rng)
    return pts, c


def gen_surface(cfg: SurfaceConfig, eps_factor: float = DEFAULT_EPS_FACTOR) -> tuple[np.ndarray, float]:
    rng = np.random.default_rng(cfg.seed)
    c = cfg.cutoff
    pts = _separate(_draw_sphere(rng, cfg.n), 2 * c * eps_factor, _draw_sphere, rng)
    return pts, c


def make_problem(cfg: UniformConfig | SurfaceConfig, sort: bool = False) -> ProblemSpec:
    """Generate ``cfg`` and wrap it with the grid domain used in the experiments."""
    if isinstance(cfg, UniformConfig):
        pts, c = gen_uniform(cfg)
        return ProblemSpec(pts, c, sort=sort, bounds=UNIT_CUBE)
    pts, c = gen_surface(cfg)
    return ProblemSpec(pts, c, sort=sort, bounds=SURFACE_BOUNDS)


def write_particles(path: str | Path, positions: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["id", "x", "y", "z"])
        for i, (x, y, z) in enumerate(np.asarray(positions, np.float32)):
            # repr of a float32 widened to float64 round-trips exactly
            w.writerow([i, repr(float(x)), repr(float(y)), repr(float(z))])


def read_particles(path: str | Path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as f:
        r = csv.reader(f)
        header = next(r, None)
        if header != ["id", "x", "y", "z"]:
            raise ValueError(f"bad particle file header: {header}")
        rows = [row for row in r if row]
    if not rows:
        return np.zeros((0, 3), np.float32)
    ids = np.array([int(row[0]) for row in rows])
    if not np.array_equal(ids, np.arange(len(rows))):
        raise ValueError("particle ids must be 0..N-1 in order")
    return np.array([[float(v) for v in row[1:4]] for row in rows], np.float32)
