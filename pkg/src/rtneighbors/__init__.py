"""Fixed-radius neighbor search through ray-traversal encodings.

Three geometric encodings (spheres, double squares, per-particle boxes) run
over a BVH and are checked against a uniform-grid baseline and a brute-force
oracle.
"""

from .bvh import Bvh, EmptySceneError, bvh_build, bvh_closest_hit, bvh_traverse_anyhit
from .engine import (Kernel, Method, NeighborEngine, NeighborResult, ProblemSpec, make_engine,
                     morton_sort, run_engine, set_threads)
from .geom import Aabb, Hit, RaySeg, SpherePrim, TrianglePrim, ray_aabb, ray_sphere, ray_triangle
from .gen import SurfaceConfig, UniformConfig, gen_surface, gen_uniform, make_problem
from .oracle import OracleCapError, brute_force

__all__ = [
    "Aabb", "Bvh", "EmptySceneError", "Hit", "Kernel", "Method", "NeighborEngine",
    "NeighborResult", "OracleCapError", "ProblemSpec", "RaySeg", "SpherePrim", "SurfaceConfig",
    "TrianglePrim", "UniformConfig", "brute_force", "bvh_build", "bvh_closest_hit",
    "bvh_traverse_anyhit", "gen_surface", "gen_uniform", "make_engine", "make_problem",
    "morton_sort", "ray_aabb", "ray_sphere", "ray_triangle", "run_engine", "set_threads",
]
