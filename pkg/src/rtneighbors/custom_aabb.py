"""Custom-AABB encoding: one box of half-width C per particle, point queries.

The target's position is a degenerate ray; every box containing it is a
candidate and the interaction is evaluated directly in the visitor, reading
the source position from the shared particle array by primitive index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from . import _accum
from . import bvh as _bvh
from ._accum import dist2, emit
from .engine import Kernel, Method, NeighborEngine, ProblemSpec


@dataclass
class AabbScene:
    positions: np.ndarray
    cutoff: float
    bvh: _bvh.Bvh | None

    @property
    def n_prims(self) -> int:
        return self.positions.shape[0]


def aabb_boxes(positions: np.ndarray, cutoff: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-particle boxes ``p +- C`` (padded outward by one float32 ulp)."""
    return _bvh.padded_cube_boxes(np.ascontiguousarray(positions, np.float32), np.float32(cutoff))


def aabb_scene_build(positions: np.ndarray, cutoff: float, leaf_size: int = 4,
                     bvh_method: str = "median") -> AabbScene:
    pos = np.ascontiguousarray(positions, dtype=np.float32)
    if pos.shape[0] == 0:
        return AabbScene(pos, float(cutoff), None)
    lo, hi = aabb_boxes(pos, cutoff)
    return AabbScene(pos, float(cutoff), _bvh.build_from_arrays(lo, hi, leaf_size, bvh_method))


@numba.njit(cache=True)
def _visit(j, st):
    pos, i, c2, acc = st
    if j == i:
        return True
    d2 = dist2(pos[i, 0], pos[i, 1], pos[i, 2], pos[j, 0], pos[j, 1], pos[j, 2])
    if d2 < c2:
        emit(i, j, d2, acc)
    return True


_walk = _bvh.point_walker(_visit)


@numba.njit(cache=True)
def _target(i, bvh, pos, c2, acc):
    _walk(bvh, np.float64(pos[i, 0]), np.float64(pos[i, 1]), np.float64(pos[i, 2]),
          (pos, i, c2, acc))


@numba.njit(cache=True, parallel=True)
def _run(bvh, pos, c2, targets, acc):
    for q in numba.prange(targets.shape[0]):
        _target(targets[q], bvh, pos, c2, acc)


def aabb_query(target_id: int, scene: AabbScene, kernel: Kernel | str = Kernel.COUNT):
    """Accumulate one target: its count, sorted neighbor ids, or potential."""
    kernel = Kernel(kernel)
    n = scene.n_prims
    mode = _accum.MODE_POTENTIAL if kernel is Kernel.POTENTIAL else _accum.MODE_COUNT
    targets = np.array([target_id], np.int64)
    acc = _accum.make_acc(mode, n, scene.cutoff)
    _run(scene.bvh.arrays, scene.positions, scene.cutoff ** 2, targets, acc)
    if kernel is Kernel.COUNT:
        return int(acc[1][target_id])
    if kernel is Kernel.POTENTIAL:
        return float(acc[4][target_id])
    offsets = np.zeros(n + 1, np.int64)
    offsets[target_id + 1:] = acc[1][target_id]
    fill = _accum.make_acc(_accum.MODE_FILL, n, scene.cutoff, offsets)
    _run(scene.bvh.arrays, scene.positions, scene.cutoff ** 2, targets, fill)
    return np.sort(fill[3])


class AabbEngine(NeighborEngine):
    method = Method.CUSTOM_AABB

    def _build(self, positions: np.ndarray, spec: ProblemSpec) -> None:
        self.scene = aabb_scene_build(positions, spec.cutoff, self.leaf_size, self.bvh_method)

    def _accumulate(self, acc, targets=None) -> None:
        sc = self.scene
        if targets is None:
            targets = np.arange(sc.n_prims, dtype=np.int64)
        _run(sc.bvh.arrays, sc.positions, sc.cutoff ** 2, targets, acc)
