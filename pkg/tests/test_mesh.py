import math

import numpy as np
import pytest

from liouville_ext.geometry import hyp_distance
from liouville_ext.mesh import (
    MeshError,
    boundary_loops,
    build_mesh,
    cut_mesh,
    dump_mesh,
    face_incidence,
    flat_cylinder,
    grid_quadrilateral,
    load_mesh,
    mesh_area,
)


def test_topology_and_area(s2, mesh02):
    m = mesh02
    assert m.euler_characteristic == -2
    assert mesh_area(m) == pytest.approx(4 * math.pi, rel=1e-9)
    # area weights give every face a third to each of its edges
    assert m.total_weight() == pytest.approx(4 * math.pi, rel=1e-9)
    assert np.all(m.edge_length > 0) and m.edge_length.max() < 2.5 * m.h


def test_edge_lengths_are_hyperbolic(mesh02):
    m = mesh02
    a, b = m.pedges[:, 0], m.pedges[:, 1]
    d = hyp_distance(m.points[a], m.points[b])
    assert np.allclose(d, m.edge_length[m.eclass], rtol=1e-12)


def test_genus3_mesh(s3):
    m = build_mesh(s3, 0.3)
    assert m.euler_characteristic == -4
    assert mesh_area(m) == pytest.approx(8 * math.pi, rel=1e-9)


def test_refinement_and_determinism(s2, mesh02):
    finer = build_mesh(s2, 0.1)
    assert finer.n_vertices > 3 * mesh02.n_vertices
    again = build_mesh(s2, 0.2)
    assert np.array_equal(again.faces, mesh02.faces)


def test_bad_resolution(s2):
    with pytest.raises(MeshError):
        build_mesh(s2, 5.0)
    with pytest.raises(MeshError):
        build_mesh(s2, 0.2, weighting="nope")


def test_dump_round_trip(s2, mesh02):
    back = load_mesh(dump_mesh(mesh02), s2)
    assert back.n_edges == mesh02.n_edges
    assert np.array_equal(back.edge_ends, mesh02.edge_ends)
    assert np.allclose(back.edge_weight, mesh02.edge_weight, rtol=0, atol=0)


def test_face_incidence(mesh02):
    fv, fe = face_incidence(mesh02)
    ends = mesh02.edge_ends[fe]
    # edge k of a face is opposite corner k
    for k in range(3):
        others = fv[:, [i for i in range(3) if i != k]]
        assert np.all(np.sort(ends[:, k], axis=1) == np.sort(others, axis=1))


def test_grid_fixture():
    m = grid_quadrilateral(3)
    assert m.n_vertices == 16 and m.euler_characteristic == 1
    assert m.total_weight() == pytest.approx(24.0)
    assert len(boundary_loops(m)) == 1


def test_cylinder_fixture():
    m = flat_cylinder(3.0, 1.0, 4)
    assert m.euler_characteristic == 0
    assert len(boundary_loops(m)) == 2
    with pytest.raises(MeshError):
        flat_cylinder(3.1, 1.0, 4)


def test_cut_along_separating_loop(s2, mesh02):
    from liouville_ext.discrete import LoopClass
    from liouville_ext.surface import parse_word

    path, _ = LoopClass(mesh02, parse_word("a1 b1 A1 B1")).shortest(np.ones(mesh02.n_edges))
    pieces = cut_mesh(mesh02, set(path.edges))
    assert len(pieces) == 2
    # two one-holed tori
    assert sorted(P.euler_characteristic for P in pieces) == [-1, -1]
    assert sum(P.n_faces for P in pieces) == mesh02.n_faces
    assert sum(P.total_weight() for P in pieces) == pytest.approx(mesh02.total_weight(), rel=1e-12)
    for P in pieces:
        assert [len(b) for b in boundary_loops(P)] == [len(path.edges)]
