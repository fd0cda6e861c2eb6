"""Sphere encoding.

Each particle becomes a sphere of radius ``r = C*sqrt(2/3) + eps``; each target
casts three axis-aligned rays through itself spanning ``[-l, l]`` with
``l = C*sqrt(2/3)``.  ``C*sqrt(2/3)`` is the distance from a coordinate axis
to the corners of the cube inscribed in the cutoff sphere, so some ray always
reaches the sphere of every neighbor.

A (ray, sphere) crossing is accepted when the pair is within the cutoff and
the ray's axis is the one closest to the source (smallest perpendicular
distance, ties resolved x < y < z).  A ray may cross one sphere twice; the
crossing is reported once per (ray, primitive), like an intersection program
that reports a single hit per primitive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from . import bvh as _bvh
from ._accum import dist2, emit
from .engine import Method, NeighborEngine, ProblemSpec
from .geom import Hit, RaySeg, SpherePrim, seg_sphere, vec3

SQRT_2_3 = math.sqrt(2.0) / math.sqrt(3.0)
AXES = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


@dataclass(frozen=True)
class SphereSceneParams:
    r: float
    l: float

    @classmethod
    def from_cutoff(cls, cutoff: float, epsilon: float) -> "SphereSceneParams":
        l = cutoff * SQRT_2_3
        return cls(r=l + epsilon, l=l)


@dataclass
class SphereScene:
    positions: np.ndarray
    params: SphereSceneParams
    bvh: _bvh.Bvh | None

    @property
    def n_prims(self) -> int:
        return self.positions.shape[0]

    def sphere(self, i: int) -> SpherePrim:
        return SpherePrim(self.positions[i], self.params.r, i)

    def intersect(self, seg: RaySeg, prim: int) -> list[Hit]:
        from .geom import ray_sphere

        return ray_sphere(seg, self.sphere(prim))


def sphere_scene_build(positions: np.ndarray, cutoff: float, epsilon: float,
                       leaf_size: int = 4, bvh_method: str = "median") -> SphereScene:
    pos = np.ascontiguousarray(positions, dtype=np.float32)
    params = SphereSceneParams.from_cutoff(cutoff, epsilon)
    if pos.shape[0] == 0:
        return SphereScene(pos, params, None)
    lo, hi = _bvh.padded_cube_boxes(pos, np.float32(params.r))
    return SphereScene(pos, params, _bvh.build_from_arrays(lo, hi, leaf_size, bvh_method))


def sphere_rays(target, params: SphereSceneParams) -> list[RaySeg]:
    """The x, y and z rays through ``target``, each spanning ``[-l, l]``."""
    o = vec3(target)
    return [RaySeg(o, np.array(a, np.float32), -params.l, params.l) for a in AXES]


@numba.njit(cache=True, inline="always")
def closest_axis(dx, dy, dz):
    """Axis with minimal perpendicular distance to offset (dx, dy, dz)."""
    ax = dy * dy + dz * dz
    ay = dx * dx + dz * dz
    az = dx * dx + dy * dy
    best = 0
    m = ax
    if ay < m:
        best = 1
        m = ay
    if az < m:
        best = 2
    return best


@numba.njit(cache=True, inline="always")
def _accept(tx, ty, tz, sx, sy, sz, axis, c2):
    dx = np.float64(tx) - np.float64(sx)
    dy = np.float64(ty) - np.float64(sy)
    dz = np.float64(tz) - np.float64(sz)
    if dx * dx + dy * dy + dz * dz >= c2:
        return False
    return closest_axis(dx, dy, dz) == axis


@numba.njit(cache=True)
def axis_hit_counts(centers, r, l):
    """Surface hits of the x, y and z segments ``[-l, l]`` through the origin
    on spheres of radius ``r`` at each of ``centers``; shape (M, 3)."""
    m = centers.shape[0]
    out = np.zeros((m, 3), np.int64)
    for k in range(m):
        cx = np.float64(centers[k, 0])
        cy = np.float64(centers[k, 1])
        cz = np.float64(centers[k, 2])
        for a in range(3):
            dx, dy, dz = (1.0, 0.0, 0.0) if a == 0 else ((0.0, 1.0, 0.0) if a == 1 else (0.0, 0.0, 1.0))
            n, _, _ = seg_sphere(0.0, 0.0, 0.0, dx, dy, dz, -l, l, cx, cy, cz, r)
            out[k, a] = n
    return out


def sphere_filter_accept(target, source, ray_axis: int, cutoff: float) -> bool:
    t = np.asarray(target, np.float32)
    s = np.asarray(source, np.float32)
    return bool(_accept(t[0], t[1], t[2], s[0], s[1], s[2], ray_axis, float(cutoff) ** 2))


@numba.njit(cache=True)
def _visit(j, st):
    pos, r, l, c2, i, axis, acc = st
    px = np.float64(pos[i, 0])
    py = np.float64(pos[i, 1])
    pz = np.float64(pos[i, 2])
    dx, dy, dz = (1.0, 0.0, 0.0) if axis == 0 else ((0.0, 1.0, 0.0) if axis == 1 else (0.0, 0.0, 1.0))
    n, _, _ = seg_sphere(px, py, pz, dx, dy, dz, -l, l,
                         np.float64(pos[j, 0]), np.float64(pos[j, 1]), np.float64(pos[j, 2]), r)
    if n == 0 or j == i:
        return True
    if _accept(pos[i, 0], pos[i, 1], pos[i, 2], pos[j, 0], pos[j, 1], pos[j, 2], axis, c2):
        emit(i, j, dist2(pos[i, 0], pos[i, 1], pos[i, 2], pos[j, 0], pos[j, 1], pos[j, 2]), acc)
    return True


_walk = _bvh.segment_walker(_visit)


@numba.njit(cache=True)
def _target(i, bvh, pos, r, l, c2, acc):
    px = np.float64(pos[i, 0])
    py = np.float64(pos[i, 1])
    pz = np.float64(pos[i, 2])
    _walk(bvh, px, py, pz, 1.0, 0.0, 0.0, -l, l, (pos, r, l, c2, i, 0, acc))
    _walk(bvh, px, py, pz, 0.0, 1.0, 0.0, -l, l, (pos, r, l, c2, i, 1, acc))
    _walk(bvh, px, py, pz, 0.0, 0.0, 1.0, -l, l, (pos, r, l, c2, i, 2, acc))


@numba.njit(cache=True, parallel=True)
def _run(bvh, pos, r, l, c2, targets, acc):
    for q in numba.prange(targets.shape[0]):
        _target(targets[q], bvh, pos, r, l, c2, acc)


class SphereEngine(NeighborEngine):
    method = Method.SPHERE

    def _build(self, positions: np.ndarray, spec: ProblemSpec) -> None:
        self.scene = sphere_scene_build(positions, spec.cutoff, spec.epsilon,
                                        self.leaf_size, self.bvh_method)

    def _accumulate(self, acc, targets=None) -> None:
        sc = self.scene
        if targets is None:
            targets = np.arange(sc.n_prims, dtype=np.int64)
        p = sc.params
        _run(sc.bvh.arrays, sc.positions, float(np.float32(p.r)), float(np.float32(p.l)),
             self.spec.cutoff ** 2, targets, acc)
