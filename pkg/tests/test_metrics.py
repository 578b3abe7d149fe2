import math

import numpy as np
import pytest

from liouville_ext.flow import close_trajectory, flow, liouville_approximant, sample_tangent
from liouville_ext.metrics import (
    BumpDensity,
    HyperbolicDensity,
    area,
    birkhoff_average,
    bump_profile,
    cauchy_schwarz_check,
    curve_rho_length,
    hopf_bound,
    hopf_ratio,
    load_density,
    pairing_residual,
    random_bump_density,
    space_average,
)
from liouville_ext.flow import WeightedMultiCurve
from liouville_ext.surface import geodesic_length, parse_word


def test_hyperbolic_area(s2):
    assert area(s2, HyperbolicDensity()).value == pytest.approx(4 * math.pi, rel=1e-9)
    assert area(s2, HyperbolicDensity(3.0)).value == pytest.approx(36 * math.pi, rel=1e-9)


def test_bump_profile():
    d = np.array([0.0, 0.5, 1.0, 2.0])
    assert np.allclose(bump_profile(d, 1.0), [1.0, math.exp(1 - 1 / 0.75), 0.0, 0.0])


def test_bump_density_is_pairing_compatible(s2):
    rho = random_bump_density(s2, 4)
    assert pairing_residual(s2, rho) < 1e-10
    assert np.all(rho.ratio(np.array([0.1, 0.3j, -0.2])) >= 0)


def test_density_text_round_trip(s2):
    rho = random_bump_density(s2, 9)
    back = load_density(rho.descriptor(), s2)
    z = np.array([0.1 + 0.2j, -0.3j])
    assert np.allclose(back(z), rho(z))
    assert isinstance(load_density(HyperbolicDensity(2.0).descriptor()), HyperbolicDensity)


def test_scaling_laws(s2):
    rho = random_bump_density(s2, 1)
    assert area(s2, rho.scaled(2.0)).value == pytest.approx(4 * area(s2, rho).value, rel=1e-9)
    assert space_average(s2, rho.scaled(2.0)).value == pytest.approx(2 * space_average(s2, rho).value, rel=1e-9)


def test_cauchy_schwarz(s2):
    for seed in range(5):
        lhs, rhs = cauchy_schwarz_check(s2, random_bump_density(s2, seed))
        assert lhs <= rhs
    lhs, rhs = cauchy_schwarz_check(s2, HyperbolicDensity(2.5))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_birkhoff_of_hyperbolic_is_one(s2):
    tr = flow(s2, sample_tangent(s2, 0), 100.0)
    assert birkhoff_average(HyperbolicDensity(), tr) == pytest.approx(1.0, rel=1e-12)


def test_birkhoff_approaches_space_average(s2):
    rho = random_bump_density(s2, 2)
    tr = flow(s2, sample_tangent(s2, 1), 5000.0)
    mean = space_average(s2, rho).value
    assert abs(birkhoff_average(rho, tr) - mean) / mean < 0.05


def test_hopf_ratio_of_hyperbolic_metric(s2):
    tr = flow(s2, sample_tangent(s2, 3), 1000.0)
    G = liouville_approximant(s2, close_trajectory(s2, tr))
    r = hopf_ratio(s2, HyperbolicDensity(), tr, G)
    assert hopf_bound(s2) == pytest.approx(math.pi ** 1.5)
    # flow path plus closing segment is a little longer than the geodesic
    assert r == pytest.approx(hopf_bound(s2), rel=0.01)


def test_curve_length_of_hyperbolic_density(s2):
    c = WeightedMultiCurve.single(parse_word("a1 b1"), 2.0)
    assert curve_rho_length(s2, HyperbolicDensity(), c) == pytest.approx(2 * geodesic_length(s2, parse_word("a1 b1")))
    rho = random_bump_density(s2, 3)
    assert curve_rho_length(s2, rho, c) > 0


def test_bad_bump_parameters(s2):
    with pytest.raises(ValueError):
        BumpDensity(s2, (0j,), (1.0, 2.0))
    with pytest.raises(ValueError):
        BumpDensity(s2, (0j,), (1.0,), radius=3.0)
