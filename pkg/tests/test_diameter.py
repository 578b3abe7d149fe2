import math

import numpy as np
import pytest

from liouville_ext.diameter import (
    RegionError,
    diameter_bound,
    discrete_diameter,
    hyperbolic_not_extremal,
    pants_constant,
    pants_decomposition,
    random_disk,
    region_check,
    region_suite,
    region_topology,
    singular_example,
)
from liouville_ext.discrete import ArcClass, DiscreteError, LoopClass, extremal_solve
from liouville_ext.flow import WeightedMultiCurve
from liouville_ext.mesh import build_mesh, grid_quadrilateral
from liouville_ext.surface import parse_word


@pytest.fixture(scope="module")
def pants02(mesh02):
    return pants_decomposition(mesh02)


def test_diameter_bound_closed_form():
    assert diameter_bound(2, 1.0)[0] == pytest.approx(30.0)
    assert diameter_bound(2, 4.0)[0] == pytest.approx(60.0)
    assert diameter_bound(3, 1.0)[0] == pytest.approx(60.0)
    total, a, b = diameter_bound(4, 2.7)
    assert a + b == pytest.approx(total, abs=1e-12)
    with pytest.raises(ValueError):
        diameter_bound(1, 1.0)


def test_diameter_scaling_and_monotonicity(mesh02):
    x = np.ones(mesh02.n_edges)
    d = discrete_diameter(mesh02, x)
    assert discrete_diameter(mesh02, 3 * x) == pytest.approx(3 * d)
    y = x.copy()
    y[::3] *= 2
    assert discrete_diameter(mesh02, y) >= d
    # sampled sources agree with all pairs on this mesh
    assert discrete_diameter(mesh02, x, max_exact=10, n_sources=200) == pytest.approx(d)


def test_diameter_stable_under_refinement(s2, mesh02):
    fine = build_mesh(s2, 0.1)
    d1 = discrete_diameter(mesh02, np.ones(mesh02.n_edges))
    d2 = discrete_diameter(fine, np.ones(fine.n_edges))
    assert abs(d1 - d2) / d2 < 0.02


def test_non_spanning_support_has_infinite_diameter(mesh02):
    x = np.zeros(mesh02.n_edges)
    x[:10] = 1.0
    assert discrete_diameter(mesh02, x, support_only=True) == math.inf
    with pytest.raises(DiscreteError):
        discrete_diameter(mesh02, np.zeros(mesh02.n_edges))


def test_single_triangle_region(mesh02):
    r = region_check(mesh02, np.ones(mesh02.n_edges), [0])
    assert r["diameter"] <= r["perimeter"] and not r["violation"]


def test_non_disk_rejected(mesh02):
    with pytest.raises(RegionError):
        region_check(mesh02, np.ones(mesh02.n_edges), np.arange(mesh02.n_faces))


def test_random_disks_are_disks(mesh02):
    rng = np.random.default_rng(0)
    for size in (1, 5, 40, 150):
        assert region_topology(mesh02, random_disk(mesh02, size, rng))["disk"]


def test_grid_optimum_middle_region():
    m = grid_quadrilateral(6)
    res = extremal_solve(m, [(ArcClass(m, m.tags["left"], m.tags["right"]), 1.0)])
    # faces of the middle third of the square
    z = m.points[m.faces].mean(axis=1)
    faces = np.flatnonzero((z.real > 2) & (z.real < 4) & (z.imag > 2) & (z.imag < 4))
    r = region_check(m, res.metric, faces)
    assert r["diameter"] < r["perimeter"]


def test_region_suite_on_extremal_metric(mesh02):
    res = extremal_solve(mesh02, [(LoopClass(mesh02, parse_word("a1")), 1.0)])
    out = region_suite(mesh02, res.metric, 20, seed=3)
    assert len(out) == 20 and not any(r["violation"] for r in out)


def test_pants_decomposition(pants02):
    dec = pants02
    assert len(dec.cuffs) == 3 and len(dec.pants) == 2
    for P, sides in zip(dec.pants, dec.pants_cuffs):
        assert P.euler_characteristic == -1
        assert len(sides) == 3
    # cuff paths are pairwise disjoint
    verts = [set(p.vertices) for p in dec.cuff_paths]
    assert not (verts[0] & verts[1]) and not (verts[0] & verts[2]) and not (verts[1] & verts[2])


def test_pants_constant(mesh02, pants02):
    d, rows = pants_constant(mesh02, pants02)
    assert 0 < d < math.inf
    assert d == max(r[3] for r in rows)
    # cuffs not on a pants count zero
    assert sum(r[3] == 0.0 for r in rows) == 2


def test_hyperbolic_metric_is_not_extremal(mesh02):
    for text in ("a1", "a1 b1"):
        rep = hyperbolic_not_extremal(mesh02, WeightedMultiCurve.single(parse_word(text)))
        assert rep["margin"] > 0 and rep["conclusive"]
        assert rep["ext"] >= rep["hyperbolic_edges"] * (1 - 1e-6)


def test_singular_example():
    rep = singular_example()
    assert rep["area"] == pytest.approx(2 * math.pi, abs=1e-8)
    assert rep["boundary_length"] == pytest.approx(2 * math.pi, rel=1e-12)
    assert rep["boundary_discrepancy"]
    for k, row in enumerate(rep["radial"], start=1):
        # closed form: the radial length from eps = exp(-e^k) to 1/e is log log (1/eps) = k
        assert row["radial_length"] == pytest.approx(k, rel=1e-10)
