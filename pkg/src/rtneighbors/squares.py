"""Double-squares encoding.

Each particle carries two squares (four triangles) facing along x at
``x +- C/2``, with half-extent ``C/2 + eps`` in y and z.  Each target casts four
+x rays placed at the corners ``(y +- C/2, z +- C/2)`` spanning
``[x - (C+eps)/2, x + (C+eps)/2]``.  Viewed as boxes, two particles' boxes
overlap whenever they are within the cutoff, and one of the target's corner
rays then crosses a face of the source.

Deduplication happens in two layers:

* per (ray, source): the crossing is owned by the lowest-index triangle of
  that source hit by the ray, so diagonal-edge crossings and rays that cross
  both faces (``|dx| <= eps/2``) report once;
* per (target, source): only the ray picked by :func:`select_ray` may accept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from . import bvh as _bvh
from ._accum import dist2, emit
from .engine import Method, NeighborEngine, ProblemSpec
from .geom import Hit, RaySeg, TrianglePrim, seg_triangle, vec3

# ray index -> (sign of y offset, sign of z offset)
RAY_SIGNS = ((1, 1), (-1, 1), (1, -1), (-1, -1))
# corner triples of the 8-corner vertex list: -x face, then +x face
TRI_CORNERS = ((0, 1, 3), (0, 2, 3), (4, 5, 7), (4, 6, 7))


@dataclass(frozen=True)
class SquaresSceneParams:
    cutoff: float
    epsilon: float

    @property
    def half_x(self) -> float:
        return self.cutoff / 2

    @property
    def half_yz(self) -> float:
        return self.cutoff / 2 + self.epsilon

    @property
    def ray_offset(self) -> float:
        return self.cutoff / 2

    @property
    def ray_length(self) -> float:
        return self.cutoff + self.epsilon

    @property
    def equal_tol(self) -> float:
        """|dy| or |dz| at or below this counts as "same coordinate"."""
        return self.epsilon / 2


@dataclass
class SquaresScene:
    positions: np.ndarray
    params: SquaresSceneParams
    triangles: np.ndarray  # (4N, 3, 3) float32
    bvh: _bvh.Bvh | None

    @property
    def n_prims(self) -> int:
        return self.triangles.shape[0]

    def triangle(self, k: int) -> TrianglePrim:
        v = self.triangles[k]
        return TrianglePrim(v[0], v[1], v[2], k)

    def intersect(self, seg: RaySeg, prim: int) -> Hit | None:
        from .geom import ray_triangle

        return ray_triangle(seg, self.triangle(prim))


def particle_corners(positions: np.ndarray, cutoff: float, epsilon: float) -> np.ndarray:
    """(N, 8, 3) corners; bit 0 of the corner index picks +z, bit 1 +y, bit 2 +x."""
    p = np.asarray(positions, np.float64)
    k = np.arange(8)
    hyz = cutoff / 2 + epsilon
    off = np.stack([np.where(k & 4, cutoff / 2, -cutoff / 2),
                    np.where(k & 2, hyz, -hyz),
                    np.where(k & 1, hyz, -hyz)], axis=1)
    return (p[:, None, :] + off[None, :, :]).astype(np.float32)


def squares_scene_build(positions: np.ndarray, cutoff: float, epsilon: float,
                        leaf_size: int = 4, bvh_method: str = "median") -> SquaresScene:
    pos = np.ascontiguousarray(positions, dtype=np.float32)
    params = SquaresSceneParams(float(cutoff), float(epsilon))
    n = pos.shape[0]
    if n == 0:
        return SquaresScene(pos, params, np.zeros((0, 3, 3), np.float32), None)
    corners = particle_corners(pos, cutoff, epsilon)
    tris = corners[:, np.array(TRI_CORNERS), :].reshape(4 * n, 3, 3)
    tris = np.ascontiguousarray(tris)
    bvh = _bvh.build_from_arrays(tris.min(axis=1), tris.max(axis=1), leaf_size, bvh_method)
    return SquaresScene(pos, params, tris, bvh)


def ray_origin(target, ray_idx: int, params: SquaresSceneParams) -> np.ndarray:
    t = np.asarray(target, np.float64)
    sy, sz = RAY_SIGNS[ray_idx]
    return np.array([t[0] - params.ray_length / 2,
                     t[1] + sy * params.ray_offset,
                     t[2] + sz * params.ray_offset])


def squares_rays(target, params: SquaresSceneParams) -> list[RaySeg]:
    """Four +x rays, index order as in ``RAY_SIGNS``."""
    vec3(target)
    d = np.array((1.0, 0.0, 0.0), np.float32)
    return [RaySeg(ray_origin(target, k, params), d, 0.0, params.ray_length) for k in range(4)]


def squares_recover_source(tri: TrianglePrim, cutoff: float) -> np.ndarray:
    """Generating particle position from one of its triangles' vertices."""
    v = tri.vertices.astype(np.float64)
    q = np.empty(3)
    q[1] = (v[:, 1].max() + v[:, 1].min()) / 2
    q[2] = (v[:, 2].max() + v[:, 2].min()) / 2
    q[0] = v[0, 0] + cutoff / 2 if tri.prim_idx % 4 < 2 else v[0, 0] - cutoff / 2
    return q


@numba.njit(cache=True, inline="always")
def select_ray(dy, dz, tol):
    """Index of the one ray allowed to accept a source offset by (dy, dz).

    Offsets are source minus target.  Both differ: the corner ray on the
    source's side.  Only z differs: ray 0 if the source is above in z, else 2.
    Only y differs: ray 0 if the source is above in y, else 1.  Neither: 0.
    """
    ey = abs(dy) <= tol
    ez = abs(dz) <= tol
    if not ey and not ez:
        return (1 if dy < 0.0 else 0) + (2 if dz < 0.0 else 0)
    if ey and not ez:
        return 0 if dz > 0.0 else 2
    if ez and not ey:
        return 0 if dy > 0.0 else 1
    return 0


@numba.njit(cache=True, inline="always")
def _accept(tx, ty, tz, sx, sy, sz, ray_idx, c2, tol):
    if dist2(tx, ty, tz, sx, sy, sz) >= c2:
        return False
    dy = np.float64(sy) - np.float64(ty)
    dz = np.float64(sz) - np.float64(tz)
    return select_ray(dy, dz, tol) == ray_idx


def squares_filter_accept(target, source, ray_idx: int, cutoff: float, epsilon: float) -> bool:
    t = np.asarray(target, np.float32)
    s = np.asarray(source, np.float32)
    tol = SquaresSceneParams(cutoff, epsilon).equal_tol
    return bool(_accept(t[0], t[1], t[2], s[0], s[1], s[2], ray_idx, float(cutoff) ** 2, tol))


@numba.njit(cache=True)
def _visit(k, st):
    pos, tris, i, ray_idx, ox, oy, oz, span, c2, tol, acc = st
    hit, _ = seg_triangle(ox, oy, oz, 1.0, 0.0, 0.0, 0.0, span, tris[k])
    if not hit:
        return True
    j = k // 4
    for kk in range(4 * j, k):
        lower, _ = seg_triangle(ox, oy, oz, 1.0, 0.0, 0.0, 0.0, span, tris[kk])
        if lower:
            return True
    if j == i:
        return True
    if _accept(pos[i, 0], pos[i, 1], pos[i, 2], pos[j, 0], pos[j, 1], pos[j, 2], ray_idx, c2, tol):
        emit(i, j, dist2(pos[i, 0], pos[i, 1], pos[i, 2], pos[j, 0], pos[j, 1], pos[j, 2]), acc)
    return True


_walk = _bvh.segment_walker(_visit)


@numba.njit(cache=True)
def _target(i, bvh, pos, tris, off, span, c2, tol, acc):
    ox = np.float64(pos[i, 0]) - span / 2
    for ray_idx in range(4):
        sy = 1.0 if ray_idx == 0 or ray_idx == 2 else -1.0
        sz = 1.0 if ray_idx < 2 else -1.0
        oy = np.float64(pos[i, 1]) + sy * off
        oz = np.float64(pos[i, 2]) + sz * off
        _walk(bvh, ox, oy, oz, 1.0, 0.0, 0.0, 0.0, span,
              (pos, tris, i, ray_idx, ox, oy, oz, span, c2, tol, acc))


@numba.njit(cache=True, parallel=True)
def _run(bvh, pos, tris, off, span, c2, tol, targets, acc):
    for q in numba.prange(targets.shape[0]):
        _target(targets[q], bvh, pos, tris, off, span, c2, tol, acc)


class SquaresEngine(NeighborEngine):
    method = Method.SQUARES

    def _build(self, positions: np.ndarray, spec: ProblemSpec) -> None:
        self.scene = squares_scene_build(positions, spec.cutoff, spec.epsilon,
                                         self.leaf_size, self.bvh_method)

    def _accumulate(self, acc, targets=None) -> None:
        sc = self.scene
        if targets is None:
            targets = np.arange(sc.positions.shape[0], dtype=np.int64)
        p = sc.params
        _run(sc.bvh.arrays, sc.positions, sc.triangles, p.ray_offset, p.ray_length,
             self.spec.cutoff ** 2, p.equal_tol, targets, acc)
