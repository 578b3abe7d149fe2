import math

import pytest

from liouville_ext.flow import (
    WeightedMultiCurve,
    close_trajectory,
    closed_geodesic,
    flow,
    liouville_approximant,
    sample_tangent,
    sample_tangents,
    self_intersection,
)
from liouville_ext.geometry import UnitTangent, hyp_distance
from liouville_ext.surface import geodesic_length, parse_word


def test_zero_and_negative_time(s2):
    v = sample_tangent(s2, 0)
    tr = flow(s2, v, 0.0)
    assert tr.end == v and len(tr.arcs) == 0
    with pytest.raises(ValueError):
        flow(s2, v, -1.0)


def test_arc_lengths_sum_to_time(s2):
    tr = flow(s2, sample_tangent(s2, 3), 50.0)
    assert tr.arcs.total_length == pytest.approx(50.0, rel=1e-12)
    for a, b, side in tr.segments:
        assert s2.contains(a, tol=1e-9) and s2.contains(b, tol=1e-9)


def test_short_flow_inside_polygon_is_a_straight_move(s2):
    v = UnitTangent(0j, 0.3)
    tr = flow(s2, v, 0.2)
    assert hyp_distance(tr.start.base, tr.end.base) == pytest.approx(0.2, rel=1e-12)


@pytest.mark.parametrize("T", [5.0, 20.0])
def test_reversibility(s2, T):
    v = sample_tangent(s2, 7)
    tr = flow(s2, v, T)
    back = flow(s2, UnitTangent(tr.end.base, tr.end.angle + math.pi), T)
    assert abs(back.end.base - tr.start.base) < 1e-6


def test_semigroup(s2):
    v = sample_tangent(s2, 11)
    whole = flow(s2, v, 15.0)
    half = flow(s2, flow(s2, v, 7.0).end, 8.0)
    assert abs(whole.end.base - half.end.base) < 1e-8


def test_sampled_tangents_lie_in_polygon(s2):
    for v in sample_tangents(s2, 200, 5):
        assert s2.contains(v.base)


def test_closed_curve_length_near_flow_time(s2):
    for seed in range(5):
        v = sample_tangent(s2, seed)
        g = close_trajectory(s2, flow(s2, v, 200.0))
        ell = geodesic_length(s2, g.components[0][0])
        # closing adds at most the polygon diameter on top of T, and the geodesic is shorter than the loop
        assert ell <= 200.0 + 2 * s2.circumradius + 1e-9
        assert ell > 180.0


def test_approximant_normalization(s2):
    g = close_trajectory(s2, flow(s2, sample_tangent(s2, 2), 100.0))
    G = liouville_approximant(s2, g)
    (word, wt), = G.components
    assert wt * geodesic_length(s2, word) == pytest.approx(self_intersection(s2), rel=1e-12)
    assert self_intersection(s2) == pytest.approx(2 * math.pi ** 2)


def test_closed_geodesic_trace(s2):
    for text in ("a1", "a1 b1", "a1 b1 A1 B1", "a1 a2 B1"):
        cg = closed_geodesic(s2, parse_word(text))
        assert cg.arcs.total_length == pytest.approx(geodesic_length(s2, parse_word(text)), rel=1e-10)


def test_multicurve_validation_and_text():
    with pytest.raises(ValueError):
        WeightedMultiCurve.single((), 1.0)
    with pytest.raises(ValueError):
        WeightedMultiCurve.single(parse_word("a1"), -1.0)
    c = WeightedMultiCurve(((parse_word("a1"), 0.5), (parse_word("b1 a2"), 2.0)))
    assert WeightedMultiCurve.from_text(c.to_text()) == c
