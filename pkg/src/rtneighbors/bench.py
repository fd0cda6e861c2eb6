"""Timed build/compute runs over the generated workloads.

One row per (method, config): mean build and compute milliseconds over the
repetitions, the COUNT checksum (sum of per-target counts) and the number of
unordered pairs.  A JIT warm-up run precedes the timed repetitions.
"""

from __future__ import annotations

import csv
import json
import platform
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numba
import numpy as np

from .engine import Kernel, Method, NeighborResult, ProblemSpec, make_engine
from .gen import RNG_NAME, SurfaceConfig, UniformConfig, make_problem
from .oracle import brute_force

METHOD_NAMES = ("sphere", "squares", "aabb", "aabb-sorted", "grid")
CSV_FIELDS = ("method", "distribution", "param", "p", "N", "seed",
              "build_ms", "compute_ms", "checksum", "pairs")


def method_variant(name: str) -> tuple[Method, bool]:
    """``'aabb-sorted'`` -> (CUSTOM_AABB, sort=True); plain names map directly."""
    if name == "aabb-sorted":
        return Method.CUSTOM_AABB, True
    if name not in METHOD_NAMES:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHOD_NAMES)}")
    return Method(name), False


def parse_methods(text: str) -> list[str]:
    if text.strip() == "all":
        return list(METHOD_NAMES)
    names = [t.strip() for t in text.split(",") if t.strip()]
    for n in names:
        method_variant(n)
    if not names:
        raise ValueError("empty method list")
    return names


@dataclass
class BenchRow:
    method: str
    distribution: str
    param: int
    p: int
    N: int
    seed: int
    build_ms: float
    compute_ms: float
    checksum: int
    pairs: int
    build_samples: list = field(default_factory=list, repr=False)
    compute_samples: list = field(default_factory=list, repr=False)

    @property
    def build_median_ms(self) -> float:
        return statistics.median(self.build_samples)

    @property
    def compute_median_ms(self) -> float:
        return statistics.median(self.compute_samples)

    def csv_row(self) -> dict:
        d = {k: getattr(self, k) for k in CSV_FIELDS}
        d["build_ms"] = f"{self.build_ms:.4f}"
        d["compute_ms"] = f"{self.compute_ms:.4f}"
        return d


@dataclass
class Mismatch:
    method: str
    target: int
    expected: list
    got: list

    def __str__(self) -> str:
        return f"{self.method}: target {self.target} expected {self.expected} got {self.got}"


def first_mismatch(method: str, ref: NeighborResult, res: NeighborResult) -> Optional[Mismatch]:
    for i in range(ref.n):
        a, b = ref.neighbors(i), res.neighbors(i)
        if not np.array_equal(a, b):
            return Mismatch(method, i, a.tolist(), b.tolist())
    return None


def time_method(name: str, spec: ProblemSpec, kernel: Kernel | str = Kernel.COUNT,
                reps: int = 5, bvh_method: str = "morton", warmup: bool = True):
    """Build and compute ``reps`` times; returns (build_ms list, compute_ms list, last result)."""
    method, sort = method_variant(name)
    spec = ProblemSpec(spec.positions, spec.cutoff, spec.epsilon, sort or spec.sort, spec.bounds)
    eng = make_engine(method, bvh_method=bvh_method)
    if warmup:
        eng.build(spec)
        eng.compute(kernel)
    builds, computes = [], []
    res = None
    for _ in range(reps):
        eng.build(spec)
        res = eng.compute(kernel)
        builds.append(eng.build_time * 1e3)
        computes.append(res.compute_time * 1e3)
    return builds, computes, res


def config_fields(cfg) -> tuple[str, int, int, int]:
    if isinstance(cfg, UniformConfig):
        return "uniform", cfg.beta, cfg.p, cfg.seed
    return "surface", cfg.alpha, cfg.p, cfg.seed


def bench_spec(spec: ProblemSpec, methods: Iterable[str], dist: str, param: int, p: int,
               seed: int, kernel: Kernel | str = Kernel.COUNT, reps: int = 5,
               bvh_method: str = "morton", verify: bool = False):
    """Rows for every method on one problem, plus verification mismatches."""
    kernel = Kernel(kernel)
    ref = brute_force(spec, Kernel.RECORD) if verify else None
    rows, bad = [], []
    for name in methods:
        b, c, res = time_method(name, spec, kernel, reps, bvh_method)
        total = res.pair_visits
        rows.append(BenchRow(name, dist, param, p, spec.n, seed, statistics.fmean(b),
                             statistics.fmean(c), total, total // 2, b, c))
        if ref is not None:
            if kernel is not Kernel.RECORD:
                _, _, res = time_method(name, spec, Kernel.RECORD, 1, bvh_method, warmup=False)
            m = first_mismatch(name, ref, res)
            if m is not None:
                bad.append(m)
    return rows, bad


def bench_config(cfg: UniformConfig | SurfaceConfig, methods: Iterable[str], **kw):
    dist, param, p, seed = config_fields(cfg)
    return bench_spec(make_problem(cfg), methods, dist, param, p, seed, **kw)


def write_csv(path: str | Path, rows: list[BenchRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r.csv_row())


def write_meta(path: str | Path, **info) -> None:
    meta = {
        "rng": RNG_NAME,
        "numpy": np.__version__,
        "numba": numba.__version__,
        "python": platform.python_version(),
        "machine": platform.machine(),
    }
    meta.update(info)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def markdown_table(rows: list[BenchRow]) -> str:
    """Markdown summary with build and compute speedup against GRID on the same config."""
    grid = {(r.distribution, r.param, r.p, r.seed): r for r in rows if r.method == "grid"}

    def speedup(ref, val):
        return f"{ref / val:.2f}x" if ref is not None and val > 0 else "-"

    out = ["| method | dist | param | p | N | build ms | compute ms | build vs grid "
           "| compute vs grid | checksum | pairs |",
           "|---|---|---|---|---|---|---|---|---|---|---|"]
    for r in rows:
        g = grid.get((r.distribution, r.param, r.p, r.seed))
        out.append(
            f"| {r.method} | {r.distribution} | {r.param} | {r.p} | {r.N} "
            f"| {r.build_ms:.3f} | {r.compute_ms:.3f} "
            f"| {speedup(g.build_ms if g else None, r.build_ms)} "
            f"| {speedup(g.compute_ms if g else None, r.compute_ms)} "
            f"| {r.checksum} | {r.pairs} |")
    return "\n".join(out)


DEFAULT_SUITE = (
    [UniformConfig(b, p, s) for b in (2, 4) for p in (1, 2) for s in (0, 1)]
    + [SurfaceConfig(8, p, s) for p in (1, 2) for s in (0, 1)]
)


def verify_suite(configs=DEFAULT_SUITE, methods: Iterable[str] = METHOD_NAMES,
                 bvh_method: str = "morton") -> dict:
    """RECORD lists of every method against brute force on each config.

    Returns ``{"checked": n, "failures": [(config, Mismatch), ...]}``; each
    failure is the first mismatching target for that (config, method).
    """
    methods = list(methods)
    failures = []
    for cfg in configs:
        spec = make_problem(cfg)
        ref = brute_force(spec, Kernel.RECORD)
        for name in methods:
            _, _, res = time_method(name, spec, Kernel.RECORD, 1, bvh_method, warmup=False)
            m = first_mismatch(name, ref, res)
            if m is not None:
                failures.append((asdict(cfg), m))
    return {"checked": len(configs) * len(methods), "failures": failures}
