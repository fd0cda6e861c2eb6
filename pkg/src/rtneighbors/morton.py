"""30-bit Morton (Z-order) codes and a stable LSD radix argsort for them."""

import numba
import numpy as np

BITS_PER_AXIS = 10
_CELLS = 1 << BITS_PER_AXIS


@numba.njit(cache=True, inline="always")
def spread_bits(v):
    """Insert two zero bits between each of the low 10 bits of ``v``."""
    v = (v | (v << 16)) & 0x030000FF
    v = (v | (v << 8)) & 0x0300F00F
    v = (v | (v << 4)) & 0x030C30C3
    v = (v | (v << 2)) & 0x09249249
    return v


@numba.njit(cache=True, inline="always")
def _quantize(x, lo, scale):
    q = int((x - lo) * scale)
    if q < 0:
        return 0
    if q > _CELLS - 1:
        return _CELLS - 1
    return q


@numba.njit(cache=True)
def morton_codes(pts, lo, hi):
    """Codes for (n, 3) points over the box [lo, hi]; x takes the high bit."""
    n = pts.shape[0]
    out = np.empty(n, np.uint32)
    sx = _CELLS / (hi[0] - lo[0]) if hi[0] > lo[0] else 0.0
    sy = _CELLS / (hi[1] - lo[1]) if hi[1] > lo[1] else 0.0
    sz = _CELLS / (hi[2] - lo[2]) if hi[2] > lo[2] else 0.0
    for i in range(n):
        qx = _quantize(np.float64(pts[i, 0]), lo[0], sx)
        qy = _quantize(np.float64(pts[i, 1]), lo[1], sy)
        qz = _quantize(np.float64(pts[i, 2]), lo[2], sz)
        out[i] = np.uint32((spread_bits(qx) << 2) | (spread_bits(qy) << 1) | spread_bits(qz))
    return out


@numba.njit(cache=True)
def radix_argsort(codes):
    """Stable argsort of 30-bit unsigned codes (three 10-bit passes)."""
    n = codes.shape[0]
    order = np.arange(n).astype(np.int32)
    keys = codes.copy()
    tmp_o = np.empty(n, np.int32)
    tmp_k = np.empty(n, np.uint32)
    hist = np.empty(1025, np.int64)
    for shift in (0, 10, 20):
        hist[:] = 0
        for k in range(n):
            hist[((keys[k] >> shift) & 1023) + 1] += 1
        for b in range(1024):
            hist[b + 1] += hist[b]
        for k in range(n):
            key = keys[k]
            b = (key >> shift) & 1023
            dst = hist[b]
            hist[b] = dst + 1
            tmp_o[dst] = order[k]
            tmp_k[dst] = key
        order, tmp_o = tmp_o, order
        keys, tmp_k = tmp_k, keys
    return order
