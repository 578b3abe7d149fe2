import math

import numpy as np
import pytest

from liouville_ext.discrete import (
    ArcClass,
    CylinderLoop,
    DiscreteError,
    LoopClass,
    TruncationError,
    active_paths,
    extremal_solve,
    hyperbolic_lower_bound,
    metric_area,
    snap_curve,
    taut_support_check,
)
from liouville_ext.flow import WeightedMultiCurve
from liouville_ext.mesh import flat_cylinder, grid_quadrilateral
from liouville_ext.surface import geodesic_length, parse_word
from oracles import brute_force_ext, simple_paths


def grid_family(k):
    m = grid_quadrilateral(k)
    return m, [(ArcClass(m, m.tags["left"], m.tags["right"]), 1.0)]


@pytest.mark.parametrize("k", [1, 2, 3])
def test_grid_matches_closed_form_and_brute_force(k):
    m, fam = grid_family(k)
    res = extremal_solve(m, fam)
    assert res.estimate.status == "certified"
    assert res.estimate.value == pytest.approx(k / (k + 1), abs=1e-8)
    brute = brute_force_ext(m, simple_paths(m, m.tags["left"], m.tags["right"]))
    assert brute == pytest.approx(k / (k + 1), abs=1e-8)
    assert res.estimate.value == pytest.approx(brute, abs=1e-8)


def test_cutting_planes_agree_with_potentials():
    m, fam = grid_family(3)
    a = extremal_solve(m, fam).estimate.value
    b = extremal_solve(m, fam, method="cuts").estimate.value
    assert a == pytest.approx(b, abs=1e-6)


def test_shuffled_runs_agree():
    m, fam = grid_family(3)
    x1 = extremal_solve(m, fam, shuffle_seed=1).metric
    x2 = extremal_solve(m, fam, shuffle_seed=2).metric
    assert np.max(np.abs(x1 - x2)) < 1e-5


def test_metric_normalized_and_admissible():
    m, fam = grid_family(2)
    res = extremal_solve(m, fam)
    assert metric_area(m, res.metric) == pytest.approx(1.0)
    (cls, _), = fam
    L = cls.shortest(res.metric)[1]
    assert L ** 2 == pytest.approx(res.estimate.value, rel=1e-6)


def test_cylinder_extremal_length():
    m = flat_cylinder(3.0, 1.0, 8)
    res = extremal_solve(m, [(CylinderLoop(m), 1.0)])
    assert res.estimate.value == pytest.approx(3.0 / (1.0 + 1.0 / 8), rel=1e-6)


@pytest.mark.parametrize("k", [1, 3])
def test_taut_support_grid(k):
    m, fam = grid_family(k)
    res = extremal_solve(m, fam)
    rep = taut_support_check(m, res)
    assert rep["fraction"] == 1.0 and rep["positive_edges"] > 0


def test_taut_support_cylinder():
    m = flat_cylinder(3.0, 1.0, 4)
    rep = taut_support_check(m, extremal_solve(m, [(CylinderLoop(m), 1.0)]))
    assert rep["fraction"] == 1.0


def test_scaling_weights(mesh02):
    # Ext(c . family) = c^2 Ext(family)
    cls = LoopClass(mesh02, parse_word("a1"))
    one = extremal_solve(mesh02, [(cls, 1.0)]).estimate.value
    two = extremal_solve(mesh02, [(cls, 2.0)]).estimate.value
    assert two == pytest.approx(4 * one, rel=1e-4)


def test_loop_beats_hyperbolic_baseline(s2, mesh02):
    c = WeightedMultiCurve.single(parse_word("a1"))
    res = extremal_solve(mesh02, [(LoopClass(mesh02, parse_word("a1")), 1.0)])
    assert res.estimate.status in ("certified", "stabilized")
    assert res.estimate.value > hyperbolic_lower_bound(s2, c)
    assert hyperbolic_lower_bound(s2, c) == pytest.approx(geodesic_length(s2, parse_word("a1")) ** 2 / (4 * math.pi))


def test_snapped_loops_are_closed_and_close_to_geodesics(s2, mesh02):
    c = WeightedMultiCurve.single(parse_word("a1 b1"))
    (path, w), = snap_curve(mesh02, c)
    assert path.closed and path.vertices[0] == path.vertices[-1]
    L = path.length(mesh02, np.ones(mesh02.n_edges))
    ell = geodesic_length(s2, parse_word("a1 b1"))
    assert ell <= L <= 1.2 * ell


def test_active_paths_are_taut(mesh02):
    res = extremal_solve(mesh02, [(LoopClass(mesh02, parse_word("a1")), 1.0)])
    paths = active_paths(mesh02, res)
    assert paths
    for group in paths[:20]:
        for p, _ in group:
            assert p.length(mesh02, res.metric) == pytest.approx(res.periods[0], rel=1e-4)


def test_truncation_reported(mesh02):
    cls = LoopClass(mesh02, parse_word("a1"), r0=0.25, r_max=0.25)
    with pytest.raises(TruncationError):
        extremal_solve(mesh02, [(cls, 1.0)])
    res = extremal_solve(mesh02, [(LoopClass(mesh02, parse_word("a1"), r0=0.25, r_max=0.25), 1.0)],
                         widen=False)
    assert res.estimate.status in ("truncated", "certified")


def test_bad_family(mesh02):
    with pytest.raises((DiscreteError, ValueError)):
        extremal_solve(mesh02, [])
    with pytest.raises(DiscreteError):
        LoopClass(mesh02, ())
