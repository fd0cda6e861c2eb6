"""Brute-force reference: every pair, in float64, no acceleration structure."""

from __future__ import annotations

import numpy as np

from . import _accum
from .engine import Kernel, Method, NeighborEngine, NeighborResult, ProblemSpec

DEFAULT_CAP = 50_000
BLOCK = 32


class OracleCapError(ValueError):
    pass


class OracleEngine(NeighborEngine):
    method = Method.ORACLE

    def __init__(self, cap: int = DEFAULT_CAP):
        super().__init__()
        self.cap = cap

    def _build(self, positions: np.ndarray, spec: ProblemSpec) -> None:
        if positions.shape[0] > self.cap:
            raise OracleCapError(f"oracle cap exceeded: N={positions.shape[0]} > {self.cap}")

    def _accumulate(self, acc) -> None:
        mode, counts, offsets, indices, pot, c = acc
        p = self.positions.astype(np.float64)
        n = p.shape[0]
        c2 = c * c
        for lo in range(0, n, BLOCK):
            hi = min(lo + BLOCK, n)
            d2 = np.zeros((hi - lo, n))
            for k in range(3):
                d = np.subtract(p[lo:hi, k, None], p[None, :, k])
                d *= d
                d2 += d
            mask = d2 < c2
            rows = np.arange(hi - lo)
            mask[rows, rows + lo] = False
            counts[lo:hi] = np.count_nonzero(mask, axis=1)
            if mode == _accum.MODE_FILL:
                _, j = np.nonzero(mask)
                indices[offsets[lo]:offsets[hi]] = j
            elif mode == _accum.MODE_POTENTIAL:
                r, j = np.nonzero(mask)
                w = 1.0 - np.sqrt(d2[r, j]) / c
                pot[lo:hi] = np.bincount(r, w * w, minlength=hi - lo)

def brute_force(spec: ProblemSpec, kernel: Kernel | str = Kernel.COUNT,
                cap: int = DEFAULT_CAP) -> NeighborResult:
    eng = OracleEngine(cap)
    eng.build(spec)
    return eng.compute(kernel)
