import math

import numpy as np
import pytest

from liouville_ext.geometry import (
    GeometryError,
    MobiusMap,
    NotHyperbolicError,
    UnitTangent,
    from_hyperboloid,
    hyp_distance,
    minkowski,
    mobius_apply,
    tangent_from_hyperboloid,
    tangent_to_hyperboloid,
    to_hyperboloid,
    translation_length,
    translation_length_from_trace,
)

rng = np.random.default_rng(0)


def random_points(n):
    return 0.9 * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))


def random_map():
    return MobiusMap.rotation(rng.uniform(0, 2 * np.pi)) @ MobiusMap.translation(rng.uniform(0, 2), rng.uniform(0, 6))


def test_distance_from_origin_closed_form():
    r = np.linspace(0, 0.99, 50)
    assert np.allclose(hyp_distance(0, r), 2 * np.arctanh(r), rtol=1e-12)


def test_isometries_preserve_distance():
    z, w = random_points(20), random_points(20)
    for _ in range(5):
        m = random_map()
        assert np.allclose(hyp_distance(m(z), m(w)), hyp_distance(z, w), rtol=1e-9)


def test_composition_and_inverse():
    a, b, c = random_map(), random_map(), random_map()
    assert ((a @ b) @ c).allclose(a @ (b @ c))
    assert (a @ a.inverse()).allclose(MobiusMap.identity())
    assert abs(a.det() - 1) < 1e-12


def test_translation_moves_origin_by_distance():
    for d in (0.1, 1.0, 3.0):
        m = MobiusMap.translation(d, 0.7)
        assert hyp_distance(0, m(0)) == pytest.approx(d, rel=1e-12)
        assert translation_length(m) == pytest.approx(d, rel=1e-9)


def test_trace_length_formula():
    for ell in (0.5, 2.0, 10.0):
        assert translation_length_from_trace(2 * math.cosh(ell / 2)) == pytest.approx(ell, rel=1e-12)
    with pytest.raises(NotHyperbolicError):
        translation_length_from_trace(1.5)
    # huge traces go through the logarithm
    assert translation_length_from_trace(math.inf, log_abs_trace=400.0) == pytest.approx(800.0, rel=1e-12)


def test_hyperboloid_round_trip():
    z = random_points(30)
    p = to_hyperboloid(z)
    assert np.allclose(minkowski(p, p), -1.0)
    assert np.allclose(from_hyperboloid(p), z)
    v = UnitTangent(0.3 + 0.2j, 1.1)
    p, u = tangent_to_hyperboloid(v)
    assert minkowski(u, u) == pytest.approx(1.0)
    assert minkowski(p, u) == pytest.approx(0.0, abs=1e-14)
    w = tangent_from_hyperboloid(p, u)
    assert w.base == pytest.approx(v.base) and w.angle % (2 * np.pi) == pytest.approx(v.angle)


def test_apply_rejects_boundary_points():
    with pytest.raises(GeometryError):
        mobius_apply(MobiusMap.identity(), 1.0)
