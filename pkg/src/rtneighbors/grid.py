"""Grid-of-cells baseline.

Cells have width equal to the cutoff, particles are binned with a three-pass
counting sort (histogram, exclusive scan, scatter) and moved into a
cell-ordered array; each target then scans the 27 surrounding cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ._accum import dist2, emit
from .engine import Method, NeighborEngine, ProblemSpec
from .geom import Aabb


@dataclass
class Grid:
    origin: np.ndarray  # float64 (3,)
    cell_width: float
    dims: tuple[int, int, int]
    cell_offsets: np.ndarray  # int64 (ncells + 1,)
    particle_order: np.ndarray  # sorted slot -> original index
    cell_of: np.ndarray  # cell id per sorted slot
    sorted_positions: np.ndarray  # float32 (N, 3), cell order

    @property
    def n_cells(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    def cell_coords(self, p) -> tuple[int, int, int]:
        p = np.asarray(p, dtype=np.float64)
        return tuple(
            min(max(int(math.floor((p[a] - self.origin[a]) / self.cell_width)), 0), self.dims[a] - 1)
            for a in range(3)
        )

    def cell_members(self, cell: int) -> np.ndarray:
        lo, hi = self.cell_offsets[cell], self.cell_offsets[cell + 1]
        return self.particle_order[lo:hi]


def grid_dims(bounds: Aabb, cell_width: float) -> tuple[int, int, int]:
    ext = bounds.max.astype(np.float64) - bounds.min.astype(np.float64)
    return tuple(max(1, int(math.ceil(e / cell_width))) for e in ext)


@numba.njit(cache=True)
def _bin(pos, ox, oy, oz, w, nx, ny, nz):
    n = pos.shape[0]
    ncells = nx * ny * nz
    cell = np.empty(n, np.int64)
    for i in range(n):
        cx = min(max(int(math.floor((np.float64(pos[i, 0]) - ox) / w)), 0), nx - 1)
        cy = min(max(int(math.floor((np.float64(pos[i, 1]) - oy) / w)), 0), ny - 1)
        cz = min(max(int(math.floor((np.float64(pos[i, 2]) - oz) / w)), 0), nz - 1)
        cell[i] = (cx * ny + cy) * nz + cz
    # histogram
    offsets = np.zeros(ncells + 1, np.int64)
    for i in range(n):
        offsets[cell[i] + 1] += 1
    # exclusive scan
    for c in range(ncells):
        offsets[c + 1] += offsets[c]
    # scatter (stable)
    cursor = offsets[:-1].copy()
    order = np.empty(n, np.int64)
    cell_sorted = np.empty(n, np.int64)
    moved = np.empty_like(pos)
    for i in range(n):
        c = cell[i]
        s = cursor[c]
        cursor[c] = s + 1
        order[s] = i
        cell_sorted[s] = c
        moved[s, 0] = pos[i, 0]
        moved[s, 1] = pos[i, 1]
        moved[s, 2] = pos[i, 2]
    return offsets, order, cell_sorted, moved


def grid_build(positions: np.ndarray, cutoff: float, bounds: Aabb) -> Grid:
    pos = np.ascontiguousarray(positions, dtype=np.float32)
    if not np.all(np.isfinite(pos)):
        raise ValueError("non-finite particle position")
    dims = grid_dims(bounds, cutoff)
    o = bounds.min.astype(np.float64)
    offsets, order, cell_sorted, moved = _bin(pos, o[0], o[1], o[2], float(cutoff), *dims)
    return Grid(o, float(cutoff), dims, offsets, order, cell_sorted, moved)


@numba.njit(cache=True)
def _scan(s, offsets, order, cell_sorted, moved, nx, ny, nz, c2, acc):
    i = order[s]
    c = cell_sorted[s]
    cz = c % nz
    cy = (c // nz) % ny
    cx = c // (ny * nz)
    px = moved[s, 0]
    py = moved[s, 1]
    pz = moved[s, 2]
    for ix in range(max(cx - 1, 0), min(cx + 2, nx)):
        for iy in range(max(cy - 1, 0), min(cy + 2, ny)):
            for iz in range(max(cz - 1, 0), min(cz + 2, nz)):
                cc = (ix * ny + iy) * nz + iz
                for t in range(offsets[cc], offsets[cc + 1]):
                    if t != s:
                        d2 = dist2(px, py, pz, moved[t, 0], moved[t, 1], moved[t, 2])
                        if d2 < c2:
                            emit(i, order[t], d2, acc)


@numba.njit(cache=True, parallel=True)
def _grid_compute(offsets, order, cell_sorted, moved, nx, ny, nz, c2, acc):
    # the per-target body lives in its own function; inlined into the parfor
    # directly, numba 0.66 miscompiles the nested loops
    for s in numba.prange(moved.shape[0]):
        _scan(s, offsets, order, cell_sorted, moved, nx, ny, nz, c2, acc)


def grid_accumulate(grid: Grid, cutoff: float, acc) -> None:
    nx, ny, nz = grid.dims
    _grid_compute(grid.cell_offsets, grid.particle_order, grid.cell_of, grid.sorted_positions,
                  nx, ny, nz, float(cutoff) ** 2, acc)


class GridEngine(NeighborEngine):
    method = Method.GRID

    def __init__(self):
        super().__init__()

    def _build(self, positions: np.ndarray, spec: ProblemSpec) -> None:
        self.grid = grid_build(positions, spec.cutoff, spec.domain())

    def _accumulate(self, acc) -> None:
        grid_accumulate(self.grid, self.spec.cutoff, acc)
