import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from rtneighbors.bench import (CSV_FIELDS, METHOD_NAMES, BenchRow, bench_config, markdown_table,
                               method_variant, parse_methods, time_method, verify_suite,
                               write_csv)
from rtneighbors.cli import main
from rtneighbors.engine import Method
from rtneighbors.gen import SurfaceConfig, UniformConfig, make_problem, write_particles
from rtneighbors.render import debug_render, write_pgm
from rtneighbors.sphere import SphereSceneParams, sphere_scene_build
from rtneighbors.squares import SquaresSceneParams, squares_scene_build


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


# -- bench -------------------------------------------------------------------

def test_method_names():
    assert parse_methods("all") == list(METHOD_NAMES)
    assert parse_methods("grid, aabb") == ["grid", "aabb"]
    assert method_variant("aabb-sorted") == (Method.CUSTOM_AABB, True)
    assert method_variant("sphere") == (Method.SPHERE, False)
    for bad in ("oracle", "voxel", ""):
        with pytest.raises(ValueError):
            parse_methods(bad)


def test_bench_config_checksums_equal():
    rows, bad = bench_config(UniformConfig(4, 2, 1), METHOD_NAMES, reps=2, verify=True)
    assert bad == []
    assert [r.method for r in rows] == list(METHOD_NAMES)
    assert len({r.checksum for r in rows}) == 1
    assert all(r.pairs * 2 == r.checksum for r in rows)
    assert all(r.build_ms >= 0 and r.compute_ms >= 0 for r in rows)


def test_reps_mean():
    spec = make_problem(UniformConfig(4, 1))
    b, c, _ = time_method("grid", spec, reps=5)
    assert len(b) == len(c) == 5
    rows, _ = bench_config(UniformConfig(4, 1), ["grid"], reps=5)
    r = rows[0]
    assert len(r.build_samples) == 5
    assert r.build_ms == pytest.approx(np.mean(r.build_samples))
    assert r.compute_ms == pytest.approx(np.mean(r.compute_samples))


def test_markdown_speedup_column():
    rows = [BenchRow("grid", "uniform", 4, 1, 64, 0, 2.0, 4.0, 10, 5),
            BenchRow("aabb", "uniform", 4, 1, 64, 0, 1.0, 8.0, 10, 5)]
    md = markdown_table(rows).splitlines()
    assert md[0].startswith("| method")
    assert "| 2.00x | 0.50x |" in md[3]
    assert "| 1.00x | 1.00x |" in md[2]


def test_write_csv_schema(tmp_path):
    rows = [BenchRow("grid", "uniform", 4, 1, 64, 0, 2.0, 4.0, 10, 5)]
    write_csv(tmp_path / "o.csv", rows)
    text = (tmp_path / "o.csv").read_text()
    assert text.splitlines()[0] == ",".join(CSV_FIELDS)
    assert "\r" not in text


def test_verify_suite_small():
    rep = verify_suite([UniformConfig(2, 1, 0), SurfaceConfig(8, 1, 0)])
    assert rep["checked"] == 2 * len(METHOD_NAMES)
    assert rep["failures"] == []


def test_verify_reports_first_mismatch(monkeypatch):
    from rtneighbors import bench

    real = bench.time_method

    def broken(name, spec, kernel, reps, bvh_method, warmup=True):
        b, c, res = real(name, spec, kernel, reps, bvh_method, warmup)
        if name == "grid":
            res.indices[res.offsets[3]] = -1
        return b, c, res

    monkeypatch.setattr(bench, "time_method", broken)
    rep = verify_suite([UniformConfig(4, 2, 0)], methods=["grid", "aabb"])
    assert len(rep["failures"]) == 1
    _, m = rep["failures"][0]
    assert m.method == "grid" and m.target <= 3


# -- cli ---------------------------------------------------------------------

def test_cli_uniform_verify(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code = main(["--dist", "uniform", "--beta", "4", "--p", "2", "--methods", "grid,aabb",
                 "--verify", "--reps", "2", "--out", str(out)])
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 2
    assert rows[0]["checksum"] == rows[1]["checksum"]
    assert rows[0]["N"] == "128"
    meta = json.loads((tmp_path / "r.csv.meta.json").read_text())
    assert meta["rng"] == "numpy.PCG64" and meta["seed"] == 0
    assert "| grid |" in capsys.readouterr().out


def test_cli_surface_all(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["--dist", "surface", "--alpha", "8", "--p", "1", "--methods", "all",
                 "--reps", "1", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert [r["method"] for r in rows] == ["sphere", "squares", "aabb", "aabb-sorted", "grid"]
    assert len({r["checksum"] for r in rows}) == 1
    assert all(r["distribution"] == "surface" and r["param"] == "8" for r in rows)


@pytest.mark.parametrize("argv", [
    ["--dist", "uniform"],
    ["--dist", "uniform", "--beta", "3"],
    ["--dist", "uniform", "--beta", "4", "--alpha", "8"],
    ["--dist", "surface", "--beta", "4"],
    ["--dist", "surface"],
    ["--dist", "uniform", "--beta", "4", "--methods", "voxel"],
    ["--dist", "uniform", "--beta", "4", "--reps", "0"],
    ["--dist", "uniform", "--beta", "4", "--kernel", "force"],
])
def test_cli_invalid_flags(argv):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == 2


def test_cli_oracle_cap(capsys):
    # N = 2 * 32^3 = 65536 is over the default cap, so --verify refuses before timing
    assert main(["--dist", "uniform", "--beta", "32", "--p", "2", "--methods", "grid", "--verify",
                 "--reps", "1"]) == 2
    assert "cap" in capsys.readouterr().err


def test_cli_save_load(tmp_path):
    saved = tmp_path / "pts.csv"
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(["--dist", "uniform", "--beta", "4", "--p", "2", "--methods", "grid", "--reps", "1",
                 "--save", str(saved), "--out", str(a)]) == 0
    assert main(["--dist", "uniform", "--beta", "4", "--p", "2", "--methods", "grid", "--reps", "1",
                 "--load", str(saved), "--out", str(b)]) == 0
    assert read_rows(a)[0]["checksum"] == read_rows(b)[0]["checksum"]


def test_cli_load_with_cutoff(tmp_path):
    f = tmp_path / "p.csv"
    write_particles(f, np.array([[0.1, 0.1, 0.1], [0.2, 0.1, 0.1], [0.9, 0.9, 0.9]]))
    out = tmp_path / "o.csv"
    assert main(["--dist", "uniform", "--load", str(f), "--cutoff", "0.2", "--methods", "all",
                 "--reps", "1", "--verify", "--out", str(out)]) == 0
    assert {r["checksum"] for r in read_rows(out)} == {"2"}


def test_cli_render(tmp_path):
    img = tmp_path / "v.pgm"
    assert main(["--dist", "uniform", "--beta", "2", "--methods", "grid", "--reps", "1",
                 "--render", str(img), "--render-size", "16"]) == 0
    data = img.read_bytes()
    assert data.startswith(b"P5\n16 16\n255\n")
    assert len(data) == len(b"P5\n16 16\n255\n") + 256


def test_cli_module_entry(tmp_path):
    out = tmp_path / "m.csv"
    r = subprocess.run([sys.executable, "-m", "rtneighbors.cli", "--dist", "uniform", "--beta", "2",
                        "--methods", "grid", "--reps", "1", "--out", str(out)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert len(read_rows(out)) == 1


# -- render ------------------------------------------------------------------

def test_render_empty_scene():
    sc = sphere_scene_build(np.zeros((0, 3), np.float32), 0.2, 2e-5)
    assert not debug_render(sc, 0, 8).any()


def test_render_single_sphere_disk():
    res = 64
    sc = sphere_scene_build(np.array([[0.5, 0.5, 0.5]], np.float32), 0.3, 3e-5)
    r = SphereSceneParams.from_cutoff(0.3, 3e-5).r
    img = debug_render(sc, 0, res)
    pixel = 2 * r / res  # view spans the sphere's box
    radius_px = math.sqrt(np.count_nonzero(img) / math.pi)
    assert abs(radius_px - r / pixel) <= 1
    assert img[res // 2, res // 2] == 255
    assert img[0, 0] == 0


def test_render_squares_rectangles():
    c, eps = 0.2, 2e-5
    pts = np.array([[0.5, 0.2, 0.2], [0.5, 0.8, 0.8]], np.float32)
    sc = squares_scene_build(pts, c, eps)
    res = 40
    img = debug_render(sc, 0, res)
    half = SquaresSceneParams(c, eps).half_yz
    lo = sc.bvh.root_box.min.astype(np.float64)
    hi = sc.bvh.root_box.max.astype(np.float64)
    # columns follow y, rows follow z
    ys = lo[1] + (np.arange(res) + 0.5) * (hi[1] - lo[1]) / res
    zs = lo[2] + (np.arange(res) + 0.5) * (hi[2] - lo[2]) / res
    expect = np.zeros((res, res), bool)
    for p in pts:
        expect |= (np.abs(zs[:, None] - p[2]) <= half) & (np.abs(ys[None, :] - p[1]) <= half)
    assert np.array_equal(img > 0, expect)
    # the near face of both squares sits at the same depth
    assert len(np.unique(img[img > 0])) == 1


def test_write_pgm(tmp_path):
    img = np.arange(12, dtype=np.uint8).reshape(3, 4)
    write_pgm(tmp_path / "x.pgm", img)
    data = (tmp_path / "x.pgm").read_bytes()
    assert data == b"P5\n4 3\n255\n" + img.tobytes()
