"""Common contract for the neighbor methods.

Every method is an engine with two timed phases: ``build`` (scene or grid
construction, including the optional Morton pre-sort) and ``compute`` (ray
casting or cell scanning plus the interaction kernel).  ``compute`` may be
called repeatedly after one ``build``.

The neighbor set of target ``t`` is ``{s != t : |p_t - p_s| < C}``; each
unordered pair contributes once to each endpoint's accumulator.
"""

from __future__ import annotations

import enum
import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from . import _accum
from .geom import Aabb
from .morton import morton_codes, radix_argsort

DEFAULT_EPS_FACTOR = 1e-4


class Method(str, enum.Enum):
    SPHERE = "sphere"
    SQUARES = "squares"
    CUSTOM_AABB = "aabb"
    GRID = "grid"
    ORACLE = "oracle"


class Kernel(str, enum.Enum):
    COUNT = "count"
    RECORD = "record"
    POTENTIAL = "potential"


@dataclass
class ProblemSpec:
    """Particle positions plus cutoff ``C`` and tolerance ``epsilon``.

    Correctness of the geometric encodings assumes no two particles are
    closer than ``2 * epsilon``; this is not checked here (it is O(N^2)).
    """

    positions: np.ndarray
    cutoff: float
    epsilon: Optional[float] = None
    sort: bool = False
    bounds: Optional[Aabb] = None  # grid domain; tight box when None

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float32)
        if pos.ndim != 2 or pos.shape[1] != 3:
            pos = pos.reshape(-1, 3)
        if not np.all(np.isfinite(pos)):
            raise ValueError("non-finite particle position")
        self.positions = pos
        self.cutoff = float(self.cutoff)
        if not self.cutoff > 0 or not math.isfinite(self.cutoff):
            raise ValueError("cutoff must be positive")
        if self.epsilon is None:
            self.epsilon = self.cutoff * DEFAULT_EPS_FACTOR
        self.epsilon = float(self.epsilon)
        if not 0 < self.epsilon <= self.cutoff / 100:
            raise ValueError(f"epsilon must satisfy 0 < eps <= C/100, got {self.epsilon}")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def domain(self) -> Aabb:
        if self.bounds is not None:
            return self.bounds
        if self.n == 0:
            return Aabb((0, 0, 0), (0, 0, 0))
        return Aabb(self.positions.min(axis=0), self.positions.max(axis=0))


@dataclass
class NeighborResult:
    kernel: Kernel
    counts: np.ndarray
    offsets: Optional[np.ndarray] = None  # RECORD: CSR row pointers
    indices: Optional[np.ndarray] = None  # RECORD: neighbor ids, per-row order unspecified
    potential: Optional[np.ndarray] = None
    build_time: float = 0.0
    compute_time: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def pair_visits(self) -> int:
        return int(self.counts.sum())

    def neighbors(self, i: int) -> np.ndarray:
        if self.indices is None:
            raise ValueError("neighbor lists are only kept by the RECORD kernel")
        return np.sort(self.indices[self.offsets[i]:self.offsets[i + 1]])

    def neighbor_lists(self) -> list[np.ndarray]:
        return [self.neighbors(i) for i in range(self.n)]


def morton_sort(positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reorder points along a 30-bit Z-order curve over their bounding box.

    Returns ``(sorted_positions, perm)`` with ``sorted_positions = positions[perm]``,
    i.e. ``perm`` maps new index to original index.  Ties keep input order.
    """
    pos = np.ascontiguousarray(positions, dtype=np.float32)
    if pos.shape[0] == 0:
        return pos.copy(), np.zeros(0, np.int64)
    lo = pos.min(axis=0).astype(np.float64)
    hi = pos.max(axis=0).astype(np.float64)
    perm = radix_argsort(morton_codes(pos, lo, hi)).astype(np.int64)
    return pos[perm], perm


def _unpermute(res: NeighborResult, perm: np.ndarray) -> None:
    """Map a result computed in sorted index space back to original ids."""
    counts = np.empty_like(res.counts)
    counts[perm] = res.counts
    if res.potential is not None:
        pot = np.empty_like(res.potential)
        pot[perm] = res.potential
        res.potential = pot
    if res.indices is not None:
        rows = np.repeat(perm, res.counts)
        cols = perm[res.indices]
        order = np.argsort(rows, kind="stable")
        res.indices = cols[order]
        res.offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    res.counts = counts


def set_threads(n: int) -> int:
    """Set the compute thread count (0 = all available); returns the count used."""
    avail = numba.config.NUMBA_NUM_THREADS
    use = avail if n <= 0 else min(n, avail)
    numba.set_num_threads(use)
    return use


class NeighborEngine(ABC):
    """Build once, then compute any kernel any number of times."""

    method: Method

    def __init__(self, leaf_size: int = 4, bvh_method: str = "morton"):
        self.leaf_size = leaf_size
        self.bvh_method = bvh_method
        self.spec: Optional[ProblemSpec] = None
        self.perm: Optional[np.ndarray] = None
        self.build_time = 0.0

    def build(self, spec: ProblemSpec) -> None:
        t0 = time.perf_counter()
        pos = spec.positions
        self.perm = None
        if spec.sort:
            pos, self.perm = morton_sort(pos)
        self.spec = spec
        self.positions = pos
        if pos.shape[0]:
            self._build(pos, spec)
        self.build_time = time.perf_counter() - t0

    @abstractmethod
    def _build(self, positions: np.ndarray, spec: ProblemSpec) -> None: ...

    @abstractmethod
    def _accumulate(self, acc) -> None:
        """Run every target through the method, writing into ``acc``."""

    def compute(self, kernel: Kernel | str = Kernel.COUNT) -> NeighborResult:
        if self.spec is None:
            raise RuntimeError("compute() called before build()")
        kernel = Kernel(kernel)
        n = self.positions.shape[0]
        c = self.spec.cutoff
        t0 = time.perf_counter()
        if kernel is Kernel.POTENTIAL:
            acc = _accum.make_acc(_accum.MODE_POTENTIAL, n, c)
        else:
            acc = _accum.make_acc(_accum.MODE_COUNT, n, c)
        if n:
            self._accumulate(acc)
        counts = acc[1]
        res = NeighborResult(kernel, counts, build_time=self.build_time)
        if kernel is Kernel.POTENTIAL:
            res.potential = acc[4]
        elif kernel is Kernel.RECORD:
            offsets = np.zeros(n + 1, np.int64)
            np.cumsum(counts, out=offsets[1:])
            fill = _accum.make_acc(_accum.MODE_FILL, n, c, offsets)
            if n:
                self._accumulate(fill)
            if not np.array_equal(fill[1], counts):
                raise RuntimeError(f"{self.method.value}: fill pass disagrees with count pass")
            res.offsets, res.indices = offsets, fill[3]
        res.compute_time = time.perf_counter() - t0
        if self.perm is not None:
            _unpermute(res, self.perm)
        return res


def engine_class(method: Method | str) -> type[NeighborEngine]:
    from .custom_aabb import AabbEngine
    from .grid import GridEngine
    from .oracle import OracleEngine
    from .sphere import SphereEngine
    from .squares import SquaresEngine

    table = {
        Method.SPHERE: SphereEngine,
        Method.SQUARES: SquaresEngine,
        Method.CUSTOM_AABB: AabbEngine,
        Method.GRID: GridEngine,
        Method.ORACLE: OracleEngine,
    }
    return table[Method(method)]


def make_engine(method: Method | str, **opts) -> NeighborEngine:
    cls = engine_class(method)
    if cls.method in (Method.GRID, Method.ORACLE):
        return cls()
    return cls(**opts)


def run_engine(method: Method | str, spec: ProblemSpec,
               kernel: Kernel | str = Kernel.COUNT, **opts) -> NeighborResult:
    """Build ``method`` over ``spec`` and run ``kernel`` once."""
    eng = make_engine(method, **opts)
    eng.build(spec)
    return eng.compute(kernel)
