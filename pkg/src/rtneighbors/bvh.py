"""Bounding volume hierarchy over per-primitive AABBs.

The tree is stored as flat arrays so it can be handed to compiled traversal
loops.  Traversal is generic over a *visitor*: a numba-compiled function
``visit(prim, state) -> bool`` that plays the role of an intersection shader
and returns False to stop the walk.  The neighbor engines pass their own
visitors; the Python API below wraps a collecting visitor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numba
import numpy as np

from .geom import Aabb, Hit, RaySeg, _seg_args, point_in_box, seg_box
from .morton import morton_codes, radix_argsort

MAX_DEPTH = 64
DEFAULT_LEAF_SIZE = 4


class EmptySceneError(ValueError):
    pass


@dataclass(frozen=True)
class BvhNode:
    box: Aabb
    left: int = -1
    right: int = -1
    first_prim: int = 0
    prim_count: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.left < 0


@dataclass
class Bvh:
    node_min: np.ndarray  # (M, 3) float32
    node_max: np.ndarray
    left: np.ndarray  # (M,) int32, -1 on leaves
    right: np.ndarray
    first: np.ndarray
    count: np.ndarray
    prim_order: np.ndarray  # slot -> primitive index, grouped by leaf
    slot_min: np.ndarray  # (P, 3) primitive boxes in slot order
    slot_max: np.ndarray
    leaf_size: int

    @property
    def arrays(self):
        """Tuple form consumed by the compiled traversals."""
        return (self.node_min, self.node_max, self.left, self.right, self.first,
                self.count, self.prim_order, self.slot_min, self.slot_max)

    @property
    def n_nodes(self) -> int:
        return self.left.shape[0]

    @property
    def n_prims(self) -> int:
        return self.prim_order.shape[0]

    @property
    def root_box(self) -> Aabb:
        return Aabb(self.node_min[0], self.node_max[0])

    def node(self, i: int) -> BvhNode:
        box = Aabb(self.node_min[i], self.node_max[i])
        if self.left[i] < 0:
            return BvhNode(box, first_prim=int(self.first[i]), prim_count=int(self.count[i]))
        return BvhNode(box, left=int(self.left[i]), right=int(self.right[i]))

    @property
    def nodes(self) -> list[BvhNode]:
        return [self.node(i) for i in range(self.n_nodes)]


# ---------------------------------------------------------------------------
# build


@numba.njit(cache=True)
def _swap(order, cen, i, j):
    t = order[i]
    order[i] = order[j]
    order[j] = t
    for a in range(3):
        c = cen[a, i]
        cen[a, i] = cen[a, j]
        cen[a, j] = c


@numba.njit(cache=True)
def _select(order, cen, axis, lo, hi, kth):
    """Partition slots lo..hi so slot kth holds its order statistic on ``axis``.

    ``cen`` rows are kept aligned with ``order`` so scans stay sequential.
    """
    keys = cen[axis]
    while hi > lo:
        a = keys[lo]
        b = keys[(lo + hi) // 2]
        c = keys[hi]
        if a > b:
            a, b = b, a
        if b > c:
            b = c
        pivot = a if a > b else b
        i = lo
        j = hi
        while i <= j:
            while keys[i] < pivot:
                i += 1
            while keys[j] > pivot:
                j -= 1
            if i <= j:
                _swap(order, cen, i, j)
                i += 1
                j -= 1
        if kth <= j:
            hi = j
        elif kth >= i:
            lo = i
        else:
            return


@numba.njit(cache=True)
def _build(bmin, bmax, leaf_size):
    n = bmin.shape[0]
    cen = np.empty((3, n), np.float64)
    for i in range(n):
        for a in range(3):
            cen[a, i] = 0.5 * (np.float64(bmin[i, a]) + np.float64(bmax[i, a]))
    order = np.arange(n).astype(np.int32)
    cap = max(2 * n - 1, 1)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    first = np.zeros(cap, np.int32)
    count = np.zeros(cap, np.int32)

    size = 2 * MAX_DEPTH + 2
    st_node = np.empty(size, np.int64)
    st_lo = np.empty(size, np.int64)
    st_hi = np.empty(size, np.int64)
    st_depth = np.empty(size, np.int64)
    sp = 1
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    st_depth[0] = 0
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        depth = st_depth[sp]
        if depth >= MAX_DEPTH:
            raise RuntimeError("BVH build exceeded maximum depth")
        cnt = hi - lo
        if cnt <= leaf_size:
            first[node] = lo
            count[node] = cnt
            continue
        axis = 0
        ext = -1.0
        for a in range(3):
            row = cen[a]
            c0 = row[lo]
            c1 = row[lo]
            for k in range(lo + 1, hi):
                v = row[k]
                if v < c0:
                    c0 = v
                elif v > c1:
                    c1 = v
            if c1 - c0 > ext:
                ext = c1 - c0
                axis = a
        mid = lo + cnt // 2
        if ext > 0.0:
            _select(order, cen, axis, lo, hi - 1, mid)
        # coincident centroids keep index order and split in half
        lch = n_nodes
        rch = n_nodes + 1
        n_nodes += 2
        left[node] = lch
        right[node] = rch
        st_node[sp] = rch
        st_lo[sp] = mid
        st_hi[sp] = hi
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lch
        st_lo[sp] = lo
        st_hi[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1

    return left, right, first, count, order, n_nodes


@numba.njit(cache=True)
def _build_morton(bmin, bmax, leaf_size):
    n = bmin.shape[0]
    cen = np.empty((n, 3), np.float64)
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for i in range(n):
        for a in range(3):
            c = 0.5 * (np.float64(bmin[i, a]) + np.float64(bmax[i, a]))
            cen[i, a] = c
            lo[a] = min(lo[a], c)
            hi[a] = max(hi[a], c)
    codes = morton_codes(cen, lo, hi)
    order = radix_argsort(codes)
    sorted_codes = codes[order]
    cap = max(2 * n - 1, 1)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    first = np.zeros(cap, np.int32)
    count = np.zeros(cap, np.int32)

    size = 2 * MAX_DEPTH + 2
    st_node = np.empty(size, np.int64)
    st_lo = np.empty(size, np.int64)
    st_hi = np.empty(size, np.int64)
    st_depth = np.empty(size, np.int64)
    sp = 1
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    st_depth[0] = 0
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        a = st_lo[sp]
        b = st_hi[sp]
        depth = st_depth[sp]
        if depth >= MAX_DEPTH:
            raise RuntimeError("BVH build exceeded maximum depth")
        cnt = b - a
        if cnt <= leaf_size:
            first[node] = a
            count[node] = cnt
            continue
        ca = sorted_codes[a]
        cb = sorted_codes[b - 1]
        if ca == cb:
            mid = a + cnt // 2
        else:
            # first slot whose code has the highest differing bit set
            bit = np.uint32(1) << np.uint32(31)
            diff = ca ^ cb
            while (diff & bit) == 0:
                bit >>= np.uint32(1)
            s = a
            e = b - 1
            while s < e:
                m = (s + e) // 2
                if sorted_codes[m] & bit:
                    e = m
                else:
                    s = m + 1
            mid = s
        lch = n_nodes
        rch = n_nodes + 1
        n_nodes += 2
        left[node] = lch
        right[node] = rch
        st_node[sp] = rch
        st_lo[sp] = mid
        st_hi[sp] = b
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lch
        st_lo[sp] = a
        st_hi[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1
    return left, right, first, count, order, n_nodes


@numba.njit(cache=True)
def _fill_boxes(left, right, first, count, order, n_nodes, bmin, bmax):
    n = order.shape[0]
    smin = np.empty((n, 3), np.float32)
    smax = np.empty((n, 3), np.float32)
    for k in range(n):
        p = order[k]
        for a in range(3):
            smin[k, a] = bmin[p, a]
            smax[k, a] = bmax[p, a]
    # children always have larger indices than their parent
    nmin = np.empty((n_nodes, 3), np.float32)
    nmax = np.empty((n_nodes, 3), np.float32)
    for node in range(n_nodes - 1, -1, -1):
        l = left[node]
        if l < 0:
            for a in range(3):
                lo_v = np.inf
                hi_v = -np.inf
                for k in range(first[node], first[node] + count[node]):
                    lo_v = min(lo_v, smin[k, a])
                    hi_v = max(hi_v, smax[k, a])
                nmin[node, a] = lo_v
                nmax[node, a] = hi_v
        else:
            r = right[node]
            for a in range(3):
                nmin[node, a] = min(nmin[l, a], nmin[r, a])
                nmax[node, a] = max(nmax[l, a], nmax[r, a])
    return (nmin, nmax, left[:n_nodes].copy(), right[:n_nodes].copy(),
            first[:n_nodes].copy(), count[:n_nodes].copy(), order, smin, smax)


BUILDERS = {"median": _build, "morton": _build_morton}


@numba.njit(cache=True)
def padded_cube_boxes(pos, half):
    """Boxes ``p +- half`` in float32, each face pushed out by one ulp.

    The padding keeps float32 rounding from shrinking a box below the exact
    ``[p - half, p + half]`` it stands for.
    """
    n = pos.shape[0]
    h = np.float32(half)
    lo = np.empty((n, 3), np.float32)
    hi = np.empty((n, 3), np.float32)
    ninf = np.float32(-np.inf)
    pinf = np.float32(np.inf)
    for i in range(n):
        for a in range(3):
            lo[i, a] = np.nextafter(pos[i, a] - h, ninf)
            hi[i, a] = np.nextafter(pos[i, a] + h, pinf)
    return lo, hi


def build_from_arrays(box_min: np.ndarray, box_max: np.ndarray,
                      leaf_size: int = DEFAULT_LEAF_SIZE, method: str = "median") -> Bvh:
    """Build over boxes given as (P, 3) min/max arrays.

    ``method`` is ``"median"`` (object median on the longest centroid axis) or
    ``"morton"`` (top-down split of the Morton-sorted centroids on the highest
    differing code bit, the linear-BVH scheme GPU builders use).
    """
    box_min = np.ascontiguousarray(box_min, dtype=np.float32)
    box_max = np.ascontiguousarray(box_max, dtype=np.float32)
    if box_min.shape[0] == 0:
        raise EmptySceneError("empty scene")
    if leaf_size < 1:
        raise ValueError("leaf_size must be >= 1")
    if box_min.shape != box_max.shape or box_min.shape[1:] != (3,):
        raise ValueError("box arrays must both have shape (P, 3)")
    if np.any(box_min > box_max):
        raise ValueError("inverted primitive box")
    if method not in BUILDERS:
        raise ValueError(f"unknown BVH build method {method!r}")
    topo = BUILDERS[method](box_min, box_max, leaf_size)
    return Bvh(*_fill_boxes(*topo, box_min, box_max), leaf_size)


def bvh_build(boxes: Sequence[Aabb], leaf_size: int = DEFAULT_LEAF_SIZE,
              method: str = "median") -> Bvh:
    if len(boxes) == 0:
        raise EmptySceneError("empty scene")
    lo = np.stack([b.min for b in boxes])
    hi = np.stack([b.max for b in boxes])
    return build_from_arrays(lo, hi, leaf_size, method)


# ---------------------------------------------------------------------------
# compiled traversal


def _make_segment_walker(visit):
    @numba.njit(cache=True)
    def walk(bvh, ox, oy, oz, dx, dy, dz, t0, t1, state):
        nmin, nmax, left, right, first, count, order, smin, smax = bvh
        hit, _, _ = seg_box(ox, oy, oz, dx, dy, dz, t0, t1, nmin[0], nmax[0])
        if not hit:
            return 0
        stack = np.empty(MAX_DEPTH, np.int32)
        stack[0] = 0
        sp = 1
        visits = 0
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if left[node] < 0:
                for k in range(first[node], first[node] + count[node]):
                    hit, _, _ = seg_box(ox, oy, oz, dx, dy, dz, t0, t1, smin[k], smax[k])
                    if hit:
                        visits += 1
                        if not visit(order[k], state):
                            return visits
                continue
            for child in (right[node], left[node]):
                hit, _, _ = seg_box(ox, oy, oz, dx, dy, dz, t0, t1, nmin[child], nmax[child])
                if hit:
                    if sp >= MAX_DEPTH:
                        raise RuntimeError("BVH traversal stack overflow")
                    stack[sp] = child
                    sp += 1
        return visits

    return walk


def _make_point_walker(visit):
    @numba.njit(cache=True)
    def walk(bvh, px, py, pz, state):
        nmin, nmax, left, right, first, count, order, smin, smax = bvh
        if not point_in_box(px, py, pz, nmin[0], nmax[0]):
            return 0
        stack = np.empty(MAX_DEPTH, np.int32)
        stack[0] = 0
        sp = 1
        visits = 0
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if left[node] < 0:
                for k in range(first[node], first[node] + count[node]):
                    if point_in_box(px, py, pz, smin[k], smax[k]):
                        visits += 1
                        if not visit(order[k], state):
                            return visits
                continue
            for child in (right[node], left[node]):
                if point_in_box(px, py, pz, nmin[child], nmax[child]):
                    if sp >= MAX_DEPTH:
                        raise RuntimeError("BVH traversal stack overflow")
                    stack[sp] = child
                    sp += 1
        return visits

    return walk


_WALKERS: dict = {}


def segment_walker(visit):
    """Compiled any-hit walk specialised on ``visit(prim, state) -> bool``.

    ``walk(bvh_arrays, ox, oy, oz, dx, dy, dz, t0, t1, state)`` calls ``visit``
    for each primitive whose box the segment overlaps, stops early when it
    returns False, and returns the number of calls.  Specialising (rather
    than passing ``visit`` as a value) keeps the callers cacheable.
    """
    key = ("segment", visit)
    if key not in _WALKERS:
        _WALKERS[key] = _make_segment_walker(visit)
    return _WALKERS[key]


def point_walker(visit):
    """Like :func:`segment_walker` for a point: boxes that contain it."""
    key = ("point", visit)
    if key not in _WALKERS:
        _WALKERS[key] = _make_point_walker(visit)
    return _WALKERS[key]


@numba.njit(cache=True)
def _collect(p, state):
    buf, n = state
    buf[n[0]] = p
    n[0] += 1
    return True


_collect_seg_walk = segment_walker(_collect)
_collect_pt_walk = point_walker(_collect)


@numba.njit(cache=True)
def _collect_segment(bvh, ox, oy, oz, dx, dy, dz, t0, t1):
    buf = np.empty(bvh[6].shape[0], np.int64)
    n = np.zeros(1, np.int64)
    _collect_seg_walk(bvh, ox, oy, oz, dx, dy, dz, t0, t1, (buf, n))
    return buf[:n[0]]


@numba.njit(cache=True)
def _collect_point(bvh, px, py, pz):
    buf = np.empty(bvh[6].shape[0], np.int64)
    n = np.zeros(1, np.int64)
    _collect_pt_walk(bvh, px, py, pz, (buf, n))
    return buf[:n[0]]


# ---------------------------------------------------------------------------
# Python API

Visitor = Callable[[int], Optional[bool]]


def _drive(prims, visitor: Visitor) -> int:
    visits = 0
    for p in prims:
        visits += 1
        if visitor(int(p)) is False:
            break
    return visits


def segment_candidates(bvh: Bvh, seg: RaySeg) -> np.ndarray:
    """Primitive indices whose AABB the segment overlaps, in traversal order."""
    return _collect_segment(bvh.arrays, *_seg_args(seg))


def point_candidates(bvh: Bvh, p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    return _collect_point(bvh.arrays, p[0], p[1], p[2])


def bvh_traverse_anyhit(bvh: Bvh, seg: RaySeg, visitor: Visitor) -> int:
    """Call ``visitor(prim_idx)`` once per primitive box hit by ``seg``.

    The visitor returns False to stop early; any other value continues.
    Returns the number of invocations.
    """
    return _drive(segment_candidates(bvh, seg), visitor)


def bvh_traverse_point(bvh: Bvh, p, visitor: Visitor) -> int:
    return _drive(point_candidates(bvh, p), visitor)


def bvh_closest_hit(bvh: Bvh, seg: RaySeg,
                    intersector: Callable[[RaySeg, int], object]) -> Optional[Hit]:
    """Minimal-t hit over the scene.

    ``intersector(seg, prim_idx)`` returns a Hit, a list of Hits, or None.
    """
    best = None
    for p in segment_candidates(bvh, seg):
        res = intersector(seg, int(p))
        if res is None:
            continue
        for h in (res if isinstance(res, list) else [res]):
            if best is None or h.t < best.t:
                best = h
    return best
