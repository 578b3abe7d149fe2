import math

import numpy as np
import pytest

from liouville_ext.surface import (
    SurfaceError,
    TrivialClassError,
    build_surface,
    cyclic_reduce,
    export_surface,
    format_word,
    free_reduce,
    geodesic_length,
    invert,
    load_surface,
    lookahead_normalize,
    normalize_point,
    parse_word,
    polygon_angle_sum,
    relator,
    same_cyclic_word,
)


def test_word_algebra():
    w = parse_word("a1 b1 A1 B1")
    assert format_word(w) == "a1 b1 A1 B1"
    assert free_reduce(w + invert(w)) == ()
    assert cyclic_reduce(parse_word("b1 a1 B1")) == parse_word("a1")
    assert same_cyclic_word(parse_word("a1 b1 a2"), parse_word("a2 a1 b1"))


@pytest.mark.parametrize("genus", [2, 3])
def test_area_and_angles(genus):
    s = build_surface(genus)
    assert s.area == pytest.approx(4 * math.pi * (genus - 1))
    # regular 4g-gon with angle sum 2 pi: Gauss-Bonnet gives the area
    assert polygon_angle_sum(s) == pytest.approx(2 * math.pi, rel=1e-12)
    m = s.evaluate(relator(genus)).matrix
    assert min(np.abs(m - np.eye(2)).max(), np.abs(m + np.eye(2)).max()) < 1e-8


def test_known_lengths_genus2(s2):
    # cosh(l/2) = 1 + 1/sqrt2, 1 + sqrt2 and 3 + 2 sqrt2 for these classes of the regular octagon
    assert geodesic_length(s2, parse_word("a1")) == pytest.approx(2 * math.acosh(1 + 2 ** -0.5), rel=1e-10)
    assert geodesic_length(s2, parse_word("a1 b1")) == pytest.approx(2 * math.acosh(1 + 2 ** 0.5), rel=1e-10)
    assert geodesic_length(s2, parse_word("a1 b1 A1 B1")) == pytest.approx(2 * math.acosh(3 + 2 * 2 ** 0.5),
                                                                          rel=1e-10)
    # every generator has the same length by symmetry
    lengths = [geodesic_length(s2, (k,)) for k in range(1, 5)]
    assert np.ptp(lengths) < 1e-10


def test_length_is_conjugation_invariant(s2):
    w = parse_word("a1 b2 A2 b1 b1")
    c = parse_word("b2 a1")
    conj = free_reduce(c + w + invert(c))
    assert geodesic_length(s2, conj) == pytest.approx(geodesic_length(s2, w), rel=1e-10)
    assert geodesic_length(s2, invert(w)) == pytest.approx(geodesic_length(s2, w), rel=1e-10)


def test_trivial_classes_raise(s2):
    with pytest.raises(TrivialClassError):
        geodesic_length(s2, ())
    with pytest.raises(SurfaceError):
        geodesic_length(s2, relator(2))


def test_normalize_point(s2):
    rng = np.random.default_rng(1)
    for _ in range(50):
        z = 0.98 * math.sqrt(rng.random()) * np.exp(2j * math.pi * rng.random())
        w, word = normalize_point(s2, z)
        assert s2.contains(w, tol=1e-9)
        assert abs(s2.evaluate(word)(w) - z) < 1e-9
        w2, _ = lookahead_normalize(s2, z)
        assert s2.contains(w2, tol=1e-9)


def test_export_round_trip(tmp_path, s2):
    export_surface(s2, tmp_path / "s.txt")
    t = load_surface(tmp_path / "s.txt")
    assert t.genus == 2
    for g, h in zip(s2.generators, t.generators):
        assert g.allclose(h, 1e-14)


def test_genus_one_rejected():
    with pytest.raises(SurfaceError):
        build_surface(1)
