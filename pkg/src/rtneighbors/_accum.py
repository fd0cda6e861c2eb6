"""Per-target accumulators shared by every compiled neighbor kernel.

An accumulator is the tuple ``(mode, counts, offsets, indices, potential, c)``.
``counts[i]`` is always incremented; in FILL mode it doubles as the write
cursor into the CSR row ``indices[offsets[i]:offsets[i + 1]]``.  Only the
owning target ever writes its slot, so targets may run in parallel.
"""

import math

import numba
import numpy as np

MODE_COUNT = 0
MODE_FILL = 1
MODE_POTENTIAL = 2


@numba.njit(cache=True, inline="always")
def dist2(px, py, pz, qx, qy, qz):
    dx = np.float64(px) - np.float64(qx)
    dy = np.float64(py) - np.float64(qy)
    dz = np.float64(pz) - np.float64(qz)
    return dx * dx + dy * dy + dz * dz


@numba.njit(cache=True, inline="always")
def emit(i, j, d2, acc):
    mode, counts, offsets, indices, pot, c = acc
    if mode == MODE_FILL:
        indices[offsets[i] + counts[i]] = j
    elif mode == MODE_POTENTIAL:
        w = 1.0 - math.sqrt(d2) / c
        pot[i] += w * w
    counts[i] += 1


def make_acc(mode: int, n: int, cutoff: float, offsets=None):
    counts = np.zeros(n, np.int64)
    if offsets is None:
        offsets = np.zeros(n + 1, np.int64)
    indices = np.empty(int(offsets[-1]) if mode == MODE_FILL else 0, np.int64)
    pot = np.zeros(n if mode == MODE_POTENTIAL else 0, np.float64)
    return (np.int64(mode), counts, offsets, indices, pot, np.float64(cutoff))
