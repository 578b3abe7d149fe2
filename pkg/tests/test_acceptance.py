"""Acceptance checks, one test per criterion.

Each test prints a single line ``criterion N: PASS|FAIL ...`` with the
measured numbers and runtime, then asserts.  The full file takes roughly
twenty minutes on one core; the long approximant solve dominates.
"""

import math
import time

import numpy as np
import pytest

from liouville_ext import diameter as dm
from liouville_ext import experiments as ex
from liouville_ext.config import ExperimentConfig
from liouville_ext.discrete import ArcClass, CylinderLoop, LoopClass, extremal_solve, taut_support_check
from liouville_ext.flow import WeightedMultiCurve
from liouville_ext.mesh import build_mesh, flat_cylinder, grid_quadrilateral
from liouville_ext.surface import build_surface, parse_word
from oracles import brute_force_ext, simple_paths

PI3 = math.pi ** 3
CYLINDER_N = 64        # finest shipped cylinder fixture


@pytest.fixture
def line(capsys):
    def emit(n, ok, detail, elapsed, limit):
        ok = bool(ok) and elapsed < limit
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.1f}s / {limit:.0f}s]")
        return ok
    return emit


@pytest.fixture(scope="module")
def mesh01():
    return build_mesh(build_surface(2), 0.1)


@pytest.fixture(scope="module")
def a1_solve(mesh01):
    t = time.perf_counter()
    res = extremal_solve(mesh01, [(LoopClass(mesh01, parse_word("a1")), 1.0)])
    return res, time.perf_counter() - t


def test_criterion_01_surface_identities(line):
    t = time.perf_counter()
    rep = ex.surface_identities(ExperimentConfig())
    el = time.perf_counter() - t
    err = max(r["error"] for r in rep.rows if r["quantity"].startswith("area"))
    assert line(1, rep.passed, f"area rel err {err:.1e} (<=1e-6), relator {rep.metrics['relator_residual']:.1e} "
                f"(<=1e-8)", el, 1)


def test_criterion_02_band(line):
    t = time.perf_counter()
    rep = ex.band_study(ExperimentConfig(seeds=tuple(range(20))))
    el = time.perf_counter() - t
    m = rep.metrics
    assert line(2, rep.passed, f"max|T-l| T=100 {m['max_gap_first']:.3f}, T=1000 {m['max_gap_last']:.3f}, "
                f"ratio {m['ratio']:.3f} (<=1.5)", el, 60)


def test_criterion_03_ergodic(line):
    t = time.perf_counter()
    rep = ex.ergodic_check(ExperimentConfig(flow_times=(2e4,), seeds=tuple(range(10)), n_densities=5))
    el = time.perf_counter() - t
    assert line(3, rep.passed, f"mean relative gap {rep.metrics['mean_gap']:.2e} (<5e-2) at T=2e4", el, 600)


def test_criterion_04_hopf(line):
    t = time.perf_counter()
    rep = ex.hopf_check(ExperimentConfig(seeds=tuple(range(10)), n_densities=5))
    el = time.perf_counter() - t
    m = rep.metrics
    shares = ", ".join(f"{v:.1f}" for v in m["monotone_share"].values())
    assert line(4, rep.passed, f"max ratio/pi^1.5 {m['max_ratio'] / PI3 ** 0.5:.4f} (<=1.05); non-increasing "
                f"share per density [{shares}] (>=0.9)", el, 600)


def test_criterion_05_cauchy_schwarz(line):
    t = time.perf_counter()
    rep = ex.cauchy_schwarz_suite(ExperimentConfig())
    el = time.perf_counter() - t
    assert line(5, rep.passed, f"violations {rep.metrics['violations']}/100, equality error "
                f"{rep.metrics['equality_error']:.1e} (<=1e-8)", el, 60)


def test_criterion_06_solver_oracles(line):
    t = time.perf_counter()
    errs = []
    for k in (1, 2, 3):
        m = grid_quadrilateral(k)
        res = extremal_solve(m, [(ArcClass(m, m.tags["left"], m.tags["right"]), 1.0)])
        errs.append(abs(res.estimate.value - k / (k + 1)))
    # brute force over every simple path, independent of the potential formulation
    brute = []
    for k in (1, 2, 3):
        m = grid_quadrilateral(k)
        brute.append(abs(brute_force_ext(m, simple_paths(m, m.tags["left"], m.tags["right"])) - k / (k + 1)))
    cyl = flat_cylinder(3.0, 1.0, CYLINDER_N)
    c = extremal_solve(cyl, [(CylinderLoop(cyl), 1.0)]).estimate.value
    cyl_err = abs(c - 3.0) / 3.0
    m = grid_quadrilateral(3)
    fam = [(ArcClass(m, m.tags["left"], m.tags["right"]), 1.0)]
    shuffle = np.max(np.abs(extremal_solve(m, fam, shuffle_seed=1).metric - extremal_solve(m, fam, shuffle_seed=2).metric))
    el = time.perf_counter() - t
    ok = max(errs + brute) <= 1e-8 and cyl_err <= 0.02 and shuffle <= 1e-5
    assert line(6, ok, f"grid err {max(errs):.1e}, brute-force err {max(brute):.1e} (<=1e-8); cylinder n={CYLINDER_N} "
                f"{c:.4f} vs c/h=3 rel {cyl_err:.2%} (<=2%); shuffled runs {shuffle:.1e} (<=1e-5)", el, 120)


def test_criterion_07_taut_support(line, mesh02):
    t = time.perf_counter()
    fractions = {}
    for k in (1, 2, 3):
        m = grid_quadrilateral(k)
        res = extremal_solve(m, [(ArcClass(m, m.tags["left"], m.tags["right"]), 1.0)])
        fractions[f"grid{k}"] = taut_support_check(m, res)["fraction"]
    for n in (8, 16):
        m = flat_cylinder(3.0, 1.0, n)
        fractions[f"cyl{n}"] = taut_support_check(m, extremal_solve(m, [(CylinderLoop(m), 1.0)]))["fraction"]
    res = extremal_solve(mesh02, [(LoopClass(mesh02, parse_word("a1")), 1.0)])
    fractions["a1_h0.2"] = taut_support_check(mesh02, res)["fraction"]
    el = time.perf_counter() - t
    worst = min(fractions.values())
    assert line(7, worst == 1.0, f"covered fraction min {worst:.3f} over {len(fractions)} converged fixtures", el, 60)


def test_criterion_08_main_theorem(line):
    t = time.perf_counter()
    cfg = ExperimentConfig(h=0.08, flow_times=(100.0, 200.0, 400.0), seeds=(0,), band_radius=0.4, tolerance=0.15)
    rep = ex.liouville_ext(cfg)
    el = time.perf_counter() - t
    vals = [r["ext_over_target"] for r in rep.rows]
    base = rep.rows[-1]["baseline_over_target"]
    lb_ok = rep.metrics["lower_bound_error"] <= 1e-9
    ok = rep.passed
    assert line(8, ok, f"target pi^3 {rep.metrics['target']:.5f}, lower bound column err "
                f"{rep.metrics['lower_bound_error']:.1e} ({'ok' if lb_ok else 'bad'}); Ext/pi^3 at T=100,200,400: "
                f"{', '.join(f'{v:.4f}' for v in vals)} (decreasing {rep.metrics['decreasing']}); T=400 in "
                f"[0.99, 1.15]? constant edge metric floor {base:.4f}", el, 1800)


def test_criterion_09_not_extremal(line, mesh01, a1_solve):
    t = time.perf_counter()
    res, solve_time = a1_solve
    rep = dm.hyperbolic_not_extremal(mesh01, WeightedMultiCurve.single(parse_word("a1")), result=res)
    el = time.perf_counter() - t + solve_time
    assert line(9, rep["conclusive"], f"h=0.1 a1: Ext {rep['ext']:.4f} vs hyperbolic {rep['hyperbolic']:.4f}, "
                f"margin {rep['margin']:.4f} (>0), status {rep['status']}", el, 300)


def test_criterion_10_regions(line, mesh01, a1_solve):
    t = time.perf_counter()
    res, solve_time = a1_solve
    out = dm.region_suite(mesh01, res.metric, 50, seed=0)
    el = time.perf_counter() - t + solve_time
    bad = sum(r["violation"] for r in out)
    worst = max(r["diameter"] / (r["perimeter"] * (1 + 5 * mesh01.h)) for r in out)
    assert line(10, bad == 0, f"violations {bad}/50, worst diam/(L(dC)(1+5h)) {worst:.3f}", el, 300)


def test_criterion_11_diameter_bound(line):
    t = time.perf_counter()
    rep = ex.diameter_suite(ExperimentConfig(h=0.1, curves=("a1", "a2", "a1 b1")))
    el = time.perf_counter() - t
    m = rep.metrics
    diams = ", ".join(f"{k} {v:.3f}" for k, v in m["diameters"].items())
    ok = all(r["pass"] for r in rep.rows if r["check"] in ("diameter", "bound", "pants"))
    assert line(11, ok, f"D' {m['d_prime']:.3f}, 30(g-1)sqrt(D')(1+5h) {m['bound'] * 1.5:.2f}; diameters {diams}",
                el, 1800)


def test_criterion_12_singular(line):
    t = time.perf_counter()
    rep = ex.singular_report()
    el = time.perf_counter() - t
    m = rep.metrics
    assert line(12, rep.passed, f"area err {m['area_error']:.1e} (<=1e-8), ratio at eps=e^-e^4 "
                f"{m['ratio_smallest_eps']:.6f} (in [0.9,1.1]), boundary {m['boundary_length']:.6f} vs stated "
                f"{m['boundary_stated']:.6f} flagged {m['boundary_discrepancy']}", el, 10)
