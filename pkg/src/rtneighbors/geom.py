"""Vectors, boxes, ray segments and the ray/primitive intersection tests.

Every test here is boundary inclusive: a segment that only touches a box face,
a sphere tangentially, or a triangle edge/vertex counts as a hit.  The scalar
kernels are numba-compiled and shared by the Python wrappers and by the
neighbor engines, so both paths run the exact same arithmetic.

Storage precision is float32; the kernels promote to float64 internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

REAL = np.float32

# Determinant magnitude below which a ray is treated as parallel to a triangle.
TRI_DET_EPS = 1e-9


def vec3(x, y=None, z=None) -> np.ndarray:
    """Return a float32 3-vector from three scalars or one 3-sequence."""
    if y is None:
        v = np.asarray(x, dtype=REAL).reshape(3)
    else:
        v = np.array((x, y, z), dtype=REAL)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector {v!r}")
    return v


@dataclass(frozen=True)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo, hi = vec3(self.min), vec3(self.max)
        if np.any(lo > hi):
            raise ValueError(f"inverted box: min={lo} max={hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    def contains(self, p) -> bool:
        p = np.asarray(p)
        return bool(np.all(self.min <= p) and np.all(p <= self.max))

    def contains_box(self, other: "Aabb") -> bool:
        return bool(np.all(self.min <= other.min) and np.all(other.max <= self.max))

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.min, other.min), np.maximum(self.max, other.max))


@dataclass(frozen=True)
class RaySeg:
    """A ray restricted to the parameter interval ``[t_start, t_end]``."""

    origin: np.ndarray
    dir: np.ndarray
    t_start: float
    t_end: float

    def __post_init__(self):
        o, d = vec3(self.origin), vec3(self.dir)
        if abs(float(np.linalg.norm(d.astype(np.float64))) - 1.0) > 1e-6:
            raise ValueError(f"ray direction must be a unit vector, got {d}")
        if not self.t_start <= self.t_end:
            raise ValueError(f"t_start {self.t_start} > t_end {self.t_end}")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "dir", d)
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "t_end", float(self.t_end))

    def point_at(self, t: float) -> np.ndarray:
        return self.origin.astype(np.float64) + t * self.dir.astype(np.float64)


@dataclass(frozen=True)
class SpherePrim:
    center: np.ndarray
    radius: float
    particle_id: int

    def __post_init__(self):
        object.__setattr__(self, "center", vec3(self.center))
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")

    def aabb(self) -> Aabb:
        r = REAL(self.radius)
        return Aabb(self.center - r, self.center + r)


@dataclass(frozen=True)
class TrianglePrim:
    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    prim_idx: int

    def __post_init__(self):
        for name in ("v0", "v1", "v2"):
            object.__setattr__(self, name, vec3(getattr(self, name)))
        e1 = self.v1.astype(np.float64) - self.v0
        e2 = self.v2.astype(np.float64) - self.v0
        if np.linalg.norm(np.cross(e1, e2)) == 0.0:
            raise ValueError("degenerate (collinear) triangle")

    @property
    def particle_id(self) -> int:
        return self.prim_idx // 4

    @property
    def vertices(self) -> np.ndarray:
        return np.stack([self.v0, self.v1, self.v2])

    def aabb(self) -> Aabb:
        v = self.vertices
        return Aabb(v.min(axis=0), v.max(axis=0))


@dataclass(frozen=True)
class Hit:
    t: float
    prim_idx: int


# ---------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True, inline="always")
def seg_box(ox, oy, oz, dx, dy, dz, t0, t1, bmin, bmax):
    """Slab test of a segment against a closed box.

    Returns ``(hit, t_enter, t_exit)``.  Axes with a zero direction component
    reduce to containment of the origin coordinate.
    """
    lo = t0
    hi = t1
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    for a in range(3):
        mn = np.float64(bmin[a])
        mx = np.float64(bmax[a])
        if d[a] == 0.0:
            if o[a] < mn or o[a] > mx:
                return False, lo, hi
        else:
            inv = 1.0 / d[a]
            ta = (mn - o[a]) * inv
            tb = (mx - o[a]) * inv
            if ta > tb:
                ta, tb = tb, ta
            if ta > lo:
                lo = ta
            if tb < hi:
                hi = tb
            if lo > hi:
                return False, lo, hi
    return True, lo, hi


@numba.njit(cache=True, inline="always")
def point_in_box(px, py, pz, bmin, bmax):
    return (bmin[0] <= px <= bmax[0]) and (bmin[1] <= py <= bmax[1]) and (bmin[2] <= pz <= bmax[2])


@numba.njit(cache=True, inline="always")
def seg_sphere(ox, oy, oz, dx, dy, dz, t0, t1, cx, cy, cz, r):
    """Surface crossings of a segment with a sphere.

    Returns ``(n, ta, tb)`` with ``n`` in {0, 1, 2} roots inside ``[t0, t1]``,
    ascending; a tangent contact is a single root.
    """
    px = ox - cx
    py = oy - cy
    pz = oz - cz
    a = dx * dx + dy * dy + dz * dz
    b = px * dx + py * dy + pz * dz
    c = px * px + py * py + pz * pz - r * r
    disc = b * b - a * c
    if disc < 0.0:
        return 0, 0.0, 0.0
    s = math.sqrt(disc)
    ra = (-b - s) / a
    rb = (-b + s) / a
    n = 0
    ta = 0.0
    tb = 0.0
    if t0 <= ra <= t1:
        ta = ra
        n = 1
    if s > 0.0 and t0 <= rb <= t1:
        if n == 0:
            ta = rb
        else:
            tb = rb
        n += 1
    return n, ta, tb


@numba.njit(cache=True, inline="always")
def seg_triangle(ox, oy, oz, dx, dy, dz, t0, t1, tri):
    """Moller-Trumbore with closed barycentric bounds.

    ``tri`` is a (3, 3) vertex array.  Returns ``(hit, t)``.
    """
    v0x = np.float64(tri[0, 0])
    v0y = np.float64(tri[0, 1])
    v0z = np.float64(tri[0, 2])
    e1x = tri[1, 0] - v0x
    e1y = tri[1, 1] - v0y
    e1z = tri[1, 2] - v0z
    e2x = tri[2, 0] - v0x
    e2y = tri[2, 1] - v0y
    e2z = tri[2, 2] - v0z
    qx = dy * e2z - dz * e2y
    qy = dz * e2x - dx * e2z
    qz = dx * e2y - dy * e2x
    det = e1x * qx + e1y * qy + e1z * qz
    if abs(det) < TRI_DET_EPS:
        return False, 0.0
    inv = 1.0 / det
    sx = ox - v0x
    sy = oy - v0y
    sz = oz - v0z
    u = (sx * qx + sy * qy + sz * qz) * inv
    if u < 0.0 or u > 1.0:
        return False, 0.0
    rx = sy * e1z - sz * e1y
    ry = sz * e1x - sx * e1z
    rz = sx * e1y - sy * e1x
    v = (dx * rx + dy * ry + dz * rz) * inv
    if v < 0.0 or u + v > 1.0:
        return False, 0.0
    t = (e2x * rx + e2y * ry + e2z * rz) * inv
    if t < t0 or t > t1:
        return False, 0.0
    return True, t


def _seg_args(seg: RaySeg):
    o = seg.origin.astype(np.float64)
    d = seg.dir.astype(np.float64)
    return o[0], o[1], o[2], d[0], d[1], d[2], seg.t_start, seg.t_end


# ---------------------------------------------------------------------------
# public scalar API


def ray_aabb(seg: RaySeg, box: Aabb) -> Optional[tuple[float, float]]:
    """Overlap interval ``(t_enter, t_exit)`` of ``seg`` with ``box``, or None."""
    hit, lo, hi = seg_box(*_seg_args(seg), box.min, box.max)
    return (lo, hi) if hit else None


def ray_sphere(seg: RaySeg, s: SpherePrim) -> list[Hit]:
    c = s.center.astype(np.float64)
    n, ta, tb = seg_sphere(*_seg_args(seg), c[0], c[1], c[2], float(s.radius))
    return [Hit(t, s.particle_id) for t in (ta, tb)[:n]]


def ray_triangle(seg: RaySeg, tri: TrianglePrim) -> Optional[Hit]:
    hit, t = seg_triangle(*_seg_args(seg), tri.vertices)
    return Hit(t, tri.prim_idx) if hit else None
