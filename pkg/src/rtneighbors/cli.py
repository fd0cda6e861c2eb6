"""``rtn-bench`` command line."""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from .bench import bench_spec, markdown_table, parse_methods, write_csv, write_meta
from .engine import Kernel, ProblemSpec, set_threads
from .gen import (SURFACE_BOUNDS, UNIT_CUBE, SurfaceConfig, UniformConfig, gen_surface,
                  gen_uniform, read_particles, write_particles)
from .oracle import OracleCapError
from .render import debug_render, write_pgm
from .sphere import sphere_scene_build
from .squares import squares_scene_build


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rtn-bench", description="Fixed-radius neighbor search benchmark.")
    ap.add_argument("--dist", choices=("uniform", "surface"), required=True)
    ap.add_argument("--beta", type=int, help="uniform: cells per axis (C = 1/beta)")
    ap.add_argument("--alpha", type=int, help="surface: size parameter (N = p*alpha^3)")
    ap.add_argument("--p", type=int, default=1, help="particles per cell")
    ap.add_argument("--methods", default="all", help="comma list or 'all'")
    ap.add_argument("--kernel", choices=[k.value for k in Kernel], default="count")
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sort", action="store_true", help="Morton pre-sort for every method")
    ap.add_argument("--verify", action="store_true", help="check RECORD lists against brute force")
    ap.add_argument("--out", type=Path, help="CSV output (metadata goes to <out>.meta.json)")
    ap.add_argument("--threads", type=int, default=0, help="0 = all available")
    ap.add_argument("--bvh", choices=("morton", "median"), default="morton", help="BVH builder")
    ap.add_argument("--render", type=Path, help="write a PGM depth image of the scene")
    ap.add_argument("--render-scene", choices=("sphere", "squares"), default="sphere")
    ap.add_argument("--render-axis", type=int, choices=(0, 1, 2), default=0)
    ap.add_argument("--render-size", type=int, default=128)
    ap.add_argument("--load", type=Path, help="read particles (id,x,y,z CSV) instead of generating")
    ap.add_argument("--save", type=Path, help="write the particles used")
    ap.add_argument("--cutoff", type=float, help="override the cutoff")
    return ap


def _problem(args, ap):
    if args.dist == "uniform":
        if args.alpha is not None:
            ap.error("--alpha only applies to --dist surface")
        if args.beta is None and (args.load is None or args.cutoff is None):
            ap.error("--dist uniform needs --beta")
    else:
        if args.beta is not None:
            ap.error("--beta only applies to --dist uniform")
        if args.alpha is None and (args.load is None or args.cutoff is None):
            ap.error("--dist surface needs --alpha")
    if args.reps < 1:
        ap.error("--reps must be at least 1")
    param = args.beta if args.dist == "uniform" else args.alpha
    try:
        cfg = None
        if param is not None:
            cls = UniformConfig if args.dist == "uniform" else SurfaceConfig
            cfg = cls(param, args.p, args.seed)
    except ValueError as e:
        ap.error(str(e))
    if args.load is not None:
        pts = read_particles(args.load)
        cutoff = args.cutoff if args.cutoff is not None else cfg.cutoff
    else:
        pts, cutoff = gen_uniform(cfg) if args.dist == "uniform" else gen_surface(cfg)
        if args.cutoff is not None:
            cutoff = args.cutoff
    bounds = UNIT_CUBE if args.dist == "uniform" else SURFACE_BOUNDS
    return ProblemSpec(pts, cutoff, sort=args.sort, bounds=bounds), param or 0


def main(argv=None) -> int:
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        methods = parse_methods(args.methods)
    except ValueError as e:
        ap.error(str(e))
    spec, param = _problem(args, ap)
    threads = set_threads(args.threads)
    if args.save is not None:
        write_particles(args.save, spec.positions)
    if args.sort:
        methods = [m.replace("aabb-sorted", "aabb") for m in methods]
        methods = list(dict.fromkeys(methods))
    try:
        rows, bad = bench_spec(spec, methods, args.dist, param, args.p, args.seed,
                               kernel=args.kernel, reps=args.reps, bvh_method=args.bvh,
                               verify=args.verify)
    except OracleCapError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(markdown_table(rows))
    if args.out is not None:
        write_csv(args.out, rows)
        write_meta(f"{args.out}.meta.json", seed=args.seed, threads=threads, kernel=args.kernel,
                   reps=args.reps, bvh=args.bvh, sort=args.sort, cutoff=spec.cutoff,
                   epsilon=spec.epsilon, distribution=args.dist, param=param, p=args.p,
                   loaded=str(args.load) if args.load else None)
    if args.render is not None:
        build = sphere_scene_build if args.render_scene == "sphere" else squares_scene_build
        scene = build(spec.positions, spec.cutoff, spec.epsilon)
        write_pgm(args.render, debug_render(scene, args.render_axis, args.render_size))
    if bad:
        for m in bad:
            print(f"VERIFY FAIL {m}", file=sys.stderr)
        return 1
    if args.verify:
        print(f"verify: {len(methods)} methods match brute force")
    return 0


if __name__ == "__main__":
    sys.exit(main())
