"""Triangulations of X and of the flat test fixtures.

The polygon is triangulated in the Klein model, where geodesics are straight,
so the sides of the polygon are edges of an ordinary convex hull.  Interior
points come from hyperbolic dart throwing; edges are then flipped to the
hyperbolic Delaunay triangulation (in-circle test in the Poincare model,
where hyperbolic circles are Euclidean circles).

Quotient bookkeeping: every polygon vertex ``v`` belongs to a quotient vertex
``A`` and carries a group word ``g_v`` with ``z_v = g_v(z_rep(A))``.  The label
of a polygon edge from ``v`` to ``w`` is ``g_v^-1 g_w``; concatenating labels
along a closed edge path gives its deck element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay

from .geometry import hyp_distance
from .surface import SurfaceError, SurfacePresentation, free_reduce, invert, parse_word, format_word


class MeshError(SurfaceError):
    pass


def to_klein(z):
    z = np.asarray(z, dtype=complex)
    return 2.0 * z / (1.0 + np.abs(z) ** 2)


def from_klein(k):
    k = np.asarray(k, dtype=complex)
    return k / (1.0 + np.sqrt(np.maximum(1.0 - np.abs(k) ** 2, 0.0)))


@dataclass(eq=False)
class SurfaceMesh:
    """A triangulated surface with identifications.

    ``points``/``faces`` describe the cut-open triangulation; quotient
    vertices and edges are classes of those.  ``edge_length`` and
    ``edge_weight`` are per quotient edge: path length is
    ``sum(edge_length * x)`` and area ``sum(edge_weight * x**2)`` for an edge
    density ``x``.
    """

    points: np.ndarray                 # complex positions of the cut-open vertices
    faces: np.ndarray                  # (F, 3) indices into points, counter clockwise
    vclass: np.ndarray                 # cut vertex -> quotient vertex
    vword: tuple                       # cut vertex -> word g_v
    pedges: np.ndarray                 # (P, 2) cut edges i < j
    eclass: np.ndarray                 # cut edge -> quotient edge
    edge_length: np.ndarray            # per quotient edge
    edge_weight: np.ndarray            # per quotient edge, area weight
    h: float
    surface: SurfacePresentation | None = None
    boundary: np.ndarray | None = None   # quotient edges on the boundary of a flat fixture
    tags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n_vertices = int(self.vclass.max()) + 1 if len(self.vclass) else 0
        self.n_edges = len(self.edge_length)
        # representative cut edge and endpoints of each quotient edge
        rep = np.full(self.n_edges, -1)
        for i, e in enumerate(self.eclass):
            if rep[e] < 0:
                rep[e] = i
        self.edge_rep = rep
        a, b = self.pedges[rep, 0], self.pedges[rep, 1]
        self.edge_ends = np.stack([self.vclass[a], self.vclass[b]], axis=1)
        self.edge_label = tuple(free_reduce(invert(self.vword[i]) + self.vword[j])
                                for i, j in zip(a, b))
        self.vrep = np.full(self.n_vertices, -1)
        for i in range(len(self.points)):
            c = self.vclass[i]
            if self.vrep[c] < 0 or len(self.vword[i]) < len(self.vword[self.vrep[c]]):
                self.vrep[c] = i

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    def adjacency(self):
        """Per quotient vertex: list of (edge, other end, label word, direction)."""
        adj = [[] for _ in range(self.n_vertices)]
        for e, (u, v) in enumerate(self.edge_ends):
            lab = self.edge_label[e]
            adj[u].append((e, v, lab, 1))
            adj[v].append((e, u, invert(lab), -1))
        return adj

    def total_weight(self) -> float:
        return float(np.sum(self.edge_weight))


# --- geometry of triangles ----------------------------------------------------------

def _edge_lengths_hyp(points, faces):
    z = points[faces]
    l0 = hyp_distance(z[:, 1], z[:, 2])
    l1 = hyp_distance(z[:, 2], z[:, 0])
    l2 = hyp_distance(z[:, 0], z[:, 1])
    return np.stack([l0, l1, l2], axis=1)   # length opposite each corner


def _cot_from_lengths(L):
    """Cotangents of the Euclidean comparison triangle's angles, opposite each side."""
    a2 = L ** 2
    cots = np.empty_like(L)
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        num = a2[:, i] + a2[:, j] - a2[:, k]
        s = 0.5 * L.sum(axis=1)
        area = np.sqrt(np.maximum(s * (s - L[:, 0]) * (s - L[:, 1]) * (s - L[:, 2]), 1e-300))
        cots[:, k] = num / (4.0 * area)
    return cots


def hyperbolic_face_areas(points, faces) -> np.ndarray:
    """Angle defects pi - (sum of angles) of geodesic triangles, angles by the hyperbolic cosine law."""
    L = _edge_lengths_hyp(points, faces)
    ch = np.cosh(L)
    sh = np.sinh(L)
    ang = np.empty_like(L)
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        c = (ch[:, i] * ch[:, j] - ch[:, k]) / (sh[:, i] * sh[:, j])
        ang[:, k] = np.arccos(np.clip(c, -1.0, 1.0))
    return math.pi - ang.sum(axis=1)


def area_weights(face_areas, faces, pedge_index, eclass, n_edges):
    """A third of the area of each adjacent face; the weights sum to the total area."""
    w = np.zeros(n_edges)
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        np.add.at(w, eclass[pedge_index(faces[:, i], faces[:, j])], face_areas / 3.0)
    return w


def duffin_weights(face_lengths, faces, pedge_index, eclass, n_edges, floor=1e-3):
    """Cotangent weights l_e * l*_e, l*_e = (cot a + cot b) l_e / 2 on comparison triangles.

    They sum to twice the area for x = 1 and reproduce the Dirichlet energy
    of the edge differences; floored at ``floor * l_e^2``.
    """
    cots = _cot_from_lengths(face_lengths)
    w = np.zeros(n_edges)
    lens = np.zeros(n_edges)
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        e = eclass[pedge_index(faces[:, i], faces[:, j])]
        np.add.at(w, e, 0.5 * cots[:, k] * face_lengths[:, k] ** 2)
        lens[e] = face_lengths[:, k]
    return np.maximum(w, floor * lens ** 2), lens


def _pedge_lookup(pedges, n_points):
    key = pedges[:, 0].astype(np.int64) * n_points + pedges[:, 1]
    order = np.argsort(key)
    skey = key[order]

    def index(i, j):
        i, j = np.minimum(i, j), np.maximum(i, j)
        k = i.astype(np.int64) * n_points + j
        pos = np.searchsorted(skey, k)
        if np.any(pos >= len(skey)) or np.any(skey[np.minimum(pos, len(skey) - 1)] != k):
            raise MeshError("face edge missing from edge list")
        return order[pos]
    return index


def _edges_of(faces):
    e = np.concatenate([faces[:, [1, 2]], faces[:, [2, 0]], faces[:, [0, 1]]])
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


# --- point placement ---------------------------------------------------------------------

def _side_params(s: SurfacePresentation, h: float) -> np.ndarray:
    half = s.side_half_length
    m = max(2, int(math.ceil(2.0 * half / h)))
    return np.linspace(-half, half, m + 1)


def _dart_throw(s: SurfacePresentation, fixed: np.ndarray, r: float, rng) -> np.ndarray:
    """Greedy hyperbolic Poisson disk sample of the polygon interior, respecting ``fixed`` points."""
    from .flow import sample_tangents

    n_cand = int(40 * s.area / r ** 2) + 100
    cand = np.array([v.base for v in sample_tangents(s, n_cand, rng)])
    # keep away from the sides, which carry their own points
    inner = np.all(np.arcsinh(-s.side_values(cand)) > 0.5 * r, axis=1)
    cand = cand[inner]
    cell = math.sinh(r / 2.0)
    grid: dict[tuple[int, int], list[complex]] = {}

    def key(z):
        return int(math.floor(z.real / cell)), int(math.floor(z.imag / cell))

    def blocked(z):
        kx, ky = key(z)
        near = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                near.extend(grid.get((kx + dx, ky + dy), ()))
        if not near:
            return False
        return bool(np.min(hyp_distance(z, np.array(near))) < r)

    for z in fixed:
        grid.setdefault(key(z), []).append(complex(z))
    out = []
    for z in cand:
        z = complex(z)
        if not blocked(z):
            grid.setdefault(key(z), []).append(z)
            out.append(z)
    return np.array(out)


def _incircle(a, b, c, d) -> bool:
    """True when d lies strictly inside the circle through a, b, c (counter clockwise)."""
    m = np.array([[a.real - d.real, a.imag - d.imag, abs(a - d) ** 2],
                  [b.real - d.real, b.imag - d.imag, abs(b - d) ** 2],
                  [c.real - d.real, c.imag - d.imag, abs(c - d) ** 2]])
    return float(np.linalg.det(m)) > 1e-14 * max(1.0, float(np.max(np.abs(m))) ** 3)


def _orient(a, b, c) -> float:
    return (b.real - a.real) * (c.imag - a.imag) - (b.imag - a.imag) * (c.real - a.real)


def delaunay_flips(points: np.ndarray, faces: np.ndarray, fixed_edges: set, klein: np.ndarray,
                   max_rounds: int = 100) -> np.ndarray:
    """Lawson flips to the hyperbolic Delaunay triangulation; ``fixed_edges`` are never flipped."""
    faces = [list(f) for f in faces]
    for _ in range(max_rounds):
        edge_faces: dict[tuple[int, int], list[int]] = {}
        for fi, f in enumerate(faces):
            for k in range(3):
                e = tuple(sorted((f[k], f[(k + 1) % 3])))
                edge_faces.setdefault(e, []).append(fi)
        flipped = 0
        touched = set()
        for e, fs in edge_faces.items():
            if len(fs) != 2 or e in fixed_edges or fs[0] in touched or fs[1] in touched:
                continue
            f1, f2 = faces[fs[0]], faces[fs[1]]
            i, j = e
            a = next(v for v in f1 if v not in e)
            b = next(v for v in f2 if v not in e)
            # orient f1 as (i, j, a) counter clockwise
            if _orient(klein[i], klein[j], klein[a]) < 0:
                i, j = j, i
            if not _incircle(points[i], points[j], points[a], points[b]):
                continue
            # the quadrilateral must stay convex in the Klein model
            if _orient(klein[a], klein[b], klein[j]) <= 0 or _orient(klein[b], klein[a], klein[i]) <= 0:
                continue
            faces[fs[0]] = [a, i, b]
            faces[fs[1]] = [b, j, a]
            touched.update(fs)
            flipped += 1
        if not flipped:
            break
    out = np.array(faces)
    for fi, f in enumerate(out):
        if _orient(*klein[f]) < 0:
            out[fi] = f[[0, 2, 1]]
    return out


# --- identification ------------------------------------------------------------------------

class _Union:
    """Union-find carrying group words: z_v = word(v)(z_root)."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.word = [()] * n

    def find(self, v):
        path = []
        while self.parent[v] != v:
            path.append(v)
            v = self.parent[v]
        return v

    def classes(self, links, n):
        adj = [[] for _ in range(n)]
        for v, w, x in links:       # z_w = letter(x)(z_v)
            adj[v].append((w, (x,)))
            adj[w].append((v, (-x,)))
        cls = np.full(n, -1)
        words: list = [()] * n
        k = 0
        for start in range(n):
            if cls[start] >= 0:
                continue
            cls[start] = k
            words[start] = ()
            stack = [start]
            while stack:
                v = stack.pop()
                for w, x in adj[v]:
                    if cls[w] < 0:
                        cls[w] = k
                        words[w] = free_reduce(x + words[v])
                        stack.append(w)
            k += 1
        return cls, words


def _midpoint(z, w) -> complex:
    from .geometry import from_hyperboloid, to_hyperboloid
    x = to_hyperboloid(z) + to_hyperboloid(w)
    return complex(from_hyperboloid(x / math.sqrt(x[0] ** 2 - x[1] ** 2 - x[2] ** 2)))


def _triangulate(s, points, side_ids, ts, fixed, h):
    klein = to_klein(points)
    # bow the sides outwards a little so their points are strict hull vertices;
    # exactly collinear hull points make the hull triangulation degenerate
    bowed = klein.copy()
    half = s.side_half_length
    for k, ids in enumerate(side_ids):
        bulge = 1e-6 * h * (1.0 - (ts / half) ** 2)
        bowed[ids] += bulge * np.exp(1j * s.side_angles[k])
    tri = Delaunay(np.column_stack([bowed.real, bowed.imag]))
    if len(np.unique(tri.simplices)) != len(points):
        raise MeshError("triangulation dropped vertices")
    return delaunay_flips(points, tri.simplices, fixed, klein)


def build_mesh(s: SurfacePresentation, h: float, seed: int = 0, weighting: str = "area",
               floor: float = 1e-3) -> SurfaceMesh:
    """Triangulate X with target hyperbolic edge length ``h``.

    ``weighting`` is "area" (a third of each adjacent face, total Area(X))
    or "cotan" (cotangent weights, total twice the area).
    """
    if not 0.01 <= h <= 1.0:
        raise MeshError(f"resolution h={h} outside [0.01, 1]")
    if weighting not in ("area", "cotan"):
        raise MeshError(f"unknown weighting {weighting!r}")
    rng = np.random.default_rng(seed)
    n = s.n_sides
    ts = _side_params(s, h)
    corners = list(s.polygon)
    pts: list[complex] = list(corners)
    side_ids: list[list[int]] = []
    for k in range(n):
        ids = [(k - 1) % n]
        for t in ts[1:-1]:
            ids.append(len(pts))
            pts.append(complex(s.side_point(k, t)))
        ids.append(k)
        side_ids.append(ids)
    boundary_pts = np.array(pts)
    interior = _dart_throw(s, boundary_pts, 0.7 * h, rng)
    fixed = set()
    for ids in side_ids:
        for a, b in zip(ids[:-1], ids[1:]):
            fixed.add((min(a, b), max(a, b)))
    for _ in range(6):
        points = np.concatenate([boundary_pts, interior])
        faces = _triangulate(s, points, side_ids, ts, fixed, h)
        pedges = _edges_of(faces)
        lens = hyp_distance(points[pedges[:, 0]], points[pedges[:, 1]])
        long = lens > 1.45 * h
        if not np.any(long):
            break
        # split the long edges at their hyperbolic midpoints and start over
        interior = np.concatenate([interior, [_midpoint(points[a], points[b]) for a, b in pedges[long]]])
    for e in fixed:
        if not np.any((pedges[:, 0] == e[0]) & (pedges[:, 1] == e[1])):
            raise MeshError("a polygon side is not a union of mesh edges")

    # identify side k (parameter t) with its partner (parameter -t)
    links = []
    for k in range(n):
        p = s.partner(k)
        if p < k:
            continue
        m = s.side_map(k).inverse()          # carries side k onto side p
        a_ids, b_ids = side_ids[k], side_ids[p][::-1]
        img = m(points[a_ids])
        if np.max(np.abs(img - points[b_ids])) > 1e-8:
            raise MeshError(f"side {k} does not match side {p} under its pairing")
        x = -s.side_letter(k)
        for v, w in zip(a_ids, b_ids):
            links.append((v, w, x))
    cls, words = _Union(len(points)).classes(links, len(points))

    # quotient edges: interior cut edges alone, side edges in pairs
    index = _pedge_lookup(pedges, len(points))
    eclass = np.full(len(pedges), -1)
    for k in range(n):
        p = s.partner(k)
        if p < k:
            continue
        a_ids, b_ids = side_ids[k], side_ids[p][::-1]
        for (a0, a1), (b0, b1) in zip(zip(a_ids[:-1], a_ids[1:]), zip(b_ids[:-1], b_ids[1:])):
            ea = index(np.array([a0]), np.array([a1]))[0]
            eb = index(np.array([b0]), np.array([b1]))[0]
            eclass[ea] = eclass[eb] = -2 - ea   # provisional shared tag
    tags = {}
    nq = 0
    for i in range(len(pedges)):
        t = eclass[i]
        if t == -1:
            eclass[i] = nq
            nq += 1
        elif t <= -2:
            if t not in tags:
                tags[t] = nq
                nq += 1
            eclass[i] = tags[t]
    L = _edge_lengths_hyp(points, faces)
    weight, lens = duffin_weights(L, faces, index, eclass, nq, floor)
    if weighting == "area":
        weight = area_weights(hyperbolic_face_areas(points, faces), faces, index, eclass, nq)
    mesh = SurfaceMesh(points, faces, cls, tuple(words), pedges, eclass, lens, weight, h, s)
    mesh.tags["weighting"] = weighting
    if mesh.euler_characteristic != s.euler_characteristic:
        raise MeshError(f"Euler characteristic {mesh.euler_characteristic}, expected {s.euler_characteristic}")
    return mesh


def mesh_area(mesh: SurfaceMesh) -> float:
    """Sum of hyperbolic face areas (flat area for the fixtures)."""
    if mesh.surface is None:
        z = mesh.points[mesh.faces]
        return float(np.sum(0.5 * np.abs(_orient_vec(z))))
    return float(np.sum(hyperbolic_face_areas(mesh.points, mesh.faces)))


def _orient_vec(z):
    a, b, c = z[:, 0], z[:, 1], z[:, 2]
    return (b.real - a.real) * (c.imag - a.imag) - (b.imag - a.imag) * (c.real - a.real)


# --- cutting along edge loops -------------------------------------------------------------------

def _corner_components(n_corners, pairs):
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n_corners, n_corners))
    return connected_components(g, directed=False)[1]


def cut_mesh(mesh: SurfaceMesh, cut_edges) -> list[SurfaceMesh]:
    """Pieces of a hyperbolic mesh cut open along a set of quotient edges.

    Each piece is a SurfaceMesh of its own: vertices on a cut are split by
    side, cut edges become boundary edges, and group words and labels are
    inherited, so covers of X restrict to covers of the piece.  Tags record
    the parent mesh, the parent quotient vertex and edge of every piece
    vertex and edge, and the parent faces.
    """
    if mesh.surface is None:
        raise MeshError("cutting needs a hyperbolic mesh")
    cut = np.zeros(mesh.n_edges, dtype=bool)
    cut[np.asarray(list(cut_edges), dtype=int)] = True
    F = mesh.n_faces
    index = _pedge_lookup(mesh.pedges, len(mesh.points))
    # cut edge of each face side k, opposite corner k
    fe = np.stack([index(mesh.faces[:, (k + 1) % 3], mesh.faces[:, (k + 2) % 3]) for k in range(3)], axis=1)
    sides: dict[int, list] = {}
    for f in range(F):
        for k in range(3):
            sides.setdefault(int(fe[f, k]), []).append((f, k))

    def corner(f, v):
        return 3 * f + int(np.flatnonzero(mesh.faces[f] == v)[0])

    by_class: dict[int, list] = {}
    for pe in sides:
        by_class.setdefault(int(mesh.eclass[pe]), []).append(pe)
    inner, outer, face_pairs = [], [], []
    for e, pes in by_class.items():
        if cut[e]:
            continue
        if len(pes) == 1:                       # interior cut edge shared by two faces
            (f1, _), (f2, _) = sides[pes[0]]
            for v in mesh.pedges[pes[0]]:
                inner.append((corner(f1, v), corner(f2, v)))
            face_pairs.append((f1, f2))
        else:                                   # a pair of identified polygon side edges
            pa, pb = pes
            (fa, _), (fb, _) = sides[pa][0], sides[pb][0]
            a0, a1 = mesh.pedges[pa]
            b0, b1 = mesh.pedges[pb]
            if mesh.vclass[a0] == mesh.vclass[a1]:
                raise MeshError("edge with both ends in one vertex class; mesh too coarse to cut")
            if mesh.vclass[a0] != mesh.vclass[b0]:
                b0, b1 = b1, b0
            outer += [(corner(fa, a0), corner(fb, b0)), (corner(fa, a1), corner(fb, b1))]
            face_pairs.append((fa, fb))
    piece_of = _corner_components(F, face_pairs) if face_pairs else np.arange(F)
    pcut = _corner_components(3 * F, inner + [(c, c) for c in range(3 * F)])
    pq = _corner_components(3 * F, inner + outer + [(c, c) for c in range(3 * F)])
    areas = hyperbolic_face_areas(mesh.points, mesh.faces)
    pieces = []
    for P in range(int(piece_of.max()) + 1):
        fs = np.flatnonzero(piece_of == P)
        corners = (3 * fs[:, None] + np.arange(3)).ravel()
        pts, pinv = np.unique(pcut[corners], return_inverse=True)
        first = np.zeros(len(pts), dtype=int)
        first[pinv[::-1]] = corners[::-1]
        parent_pt = mesh.faces.ravel()[first]
        qs, vclass = np.unique(pq[first], return_inverse=True)
        faces = pinv.reshape(-1, 3)
        pedges = _edges_of(faces)
        pidx = _pedge_lookup(pedges, len(pts))
        # identified polygon side edges share a parent quotient edge and a piece vertex pair
        key = {}
        eclass = np.empty(len(pedges), dtype=int)
        qedge = []
        for i, (a, b) in enumerate(pedges):
            e = int(mesh.eclass[index(np.array([parent_pt[a]]), np.array([parent_pt[b]]))[0]])
            k = (e, *sorted((int(vclass[a]), int(vclass[b]))))
            if k not in key:
                key[k] = len(qedge)
                qedge.append(e)
            eclass[i] = key[k]
        qedge = np.array(qedge)
        weight = area_weights(areas[fs], faces, pidx, eclass, len(qedge))
        count = np.zeros(len(qedge), dtype=int)
        for k in range(3):
            np.add.at(count, eclass[pidx(faces[:, (k + 1) % 3], faces[:, (k + 2) % 3])], 1)
        piece = SurfaceMesh(mesh.points[parent_pt], faces, vclass,
                            tuple(mesh.vword[v] for v in parent_pt), pedges, eclass,
                            mesh.edge_length[qedge].copy(), weight, mesh.h, mesh.surface,
                            boundary=np.flatnonzero(count == 1),
                            tags={"kind": "piece", "parent": mesh, "faces": fs, "qedge": qedge,
                                  "qvertex": mesh.vclass[parent_pt][np.unique(vclass, return_index=True)[1]]})
        pieces.append(piece)
    return pieces


def face_incidence(mesh: SurfaceMesh):
    """Quotient vertices and quotient edges of every face, as (F, 3) arrays; edge k is opposite corner k."""
    index = _pedge_lookup(mesh.pedges, len(mesh.points))
    fv = mesh.vclass[mesh.faces]
    fe = np.stack([mesh.eclass[index(mesh.faces[:, (k + 1) % 3], mesh.faces[:, (k + 2) % 3])] for k in range(3)],
                  axis=1)
    return fv, fe


def boundary_loops(mesh: SurfaceMesh) -> list[np.ndarray]:
    """Boundary edges grouped into connected components (quotient edge ids).

    Without a recorded boundary, edges with a single adjacent face are used.
    """
    if mesh.boundary is not None:
        b = np.asarray(mesh.boundary, dtype=int)
    else:
        edges, count = np.unique(face_incidence(mesh)[1], return_counts=True)
        b = edges[count == 1]
    if not len(b):
        return []
    u, v = mesh.edge_ends[b, 0], mesh.edge_ends[b, 1]
    g = coo_matrix((np.ones(len(b)), (u, v)), shape=(mesh.n_vertices,) * 2)
    lab = connected_components(g, directed=False)[1]
    comps = {}
    for e, a in zip(b, lab[u]):
        comps.setdefault(int(a), []).append(int(e))
    return [np.array(c) for _, c in sorted(comps.items(), key=lambda kv: min(kv[1]))]


# --- flat fixtures ----------------------------------------------------------------------------

def _flat_mesh(points, faces, links, h, boundary_test=None, unit=False, tags=None) -> SurfaceMesh:
    """Flat triangulation; ``links`` identify vertices (translation letter 1 or -1)."""
    faces = np.array(faces)
    pedges = _edges_of(faces)
    cls, words = _Union(len(points)).classes(links, len(points))
    key = {}
    eclass = np.empty(len(pedges), dtype=int)
    for i, (a, b) in enumerate(pedges):
        # cut edges are identified when their endpoint classes and label agree
        lab = free_reduce(invert(words[a]) + words[b])
        ca, cb = cls[a], cls[b]
        k = (ca, cb, lab) if (ca, cb) <= (cb, ca) else (cb, ca, invert(lab))
        eclass[i] = key.setdefault(k, len(key))
    nq = len(key)
    z = points[faces]
    L = np.stack([np.abs(z[:, 1] - z[:, 2]), np.abs(z[:, 2] - z[:, 0]), np.abs(z[:, 0] - z[:, 1])], axis=1)
    index = _pedge_lookup(pedges, len(points))
    weight, lens = duffin_weights(L, faces, index, eclass, nq, floor=0.0)
    if unit:
        weight = np.ones(nq)
    mesh = SurfaceMesh(points, faces, cls, tuple(words), pedges, eclass, lens, weight, h, None)
    if boundary_test is not None:
        on = boundary_test(points[pedges[:, 0]]) & boundary_test(points[pedges[:, 1]])
        mesh.boundary = np.unique(eclass[on])
    if tags:
        mesh.tags.update(tags)
    return mesh


def grid_quadrilateral(k: int) -> SurfaceMesh:
    """k x k unit squares, each cut by a diagonal; only the axis parallel edges carry weight.

    Diagonals get zero length and weight: they are listed so the fixture is a
    triangulation, but metric and paths live on the square grid, which is the
    unit resistor network of the classical example.
    """
    n = k + 1
    pts = np.array([complex(i, j) for j in range(n) for i in range(n)])
    faces = []
    for j in range(k):
        for i in range(k):
            a, b, c, d = j * n + i, j * n + i + 1, (j + 1) * n + i + 1, (j + 1) * n + i
            faces += [(a, b, c), (a, c, d)]
    mesh = _flat_mesh(pts, faces, [], 1.0, unit=True)
    diag = np.array([abs(abs(pts[a] - pts[b]) - 1.0) > 1e-9 for a, b in mesh.pedges[mesh.edge_rep]])
    mesh.edge_weight = np.where(diag, 0.0, 1.0)
    mesh.edge_length = np.where(diag, 0.0, 1.0)
    mesh.tags.update(kind="grid", k=k, left=np.flatnonzero(pts.real == 0), right=np.flatnonzero(pts.real == k))
    mesh.tags["diagonal"] = np.flatnonzero(diag)
    return mesh


def flat_cylinder(circumference: float = 3.0, height: float = 1.0, n: int = 8) -> SurfaceMesh:
    """Square grid cylinder with ``n`` squares per unit length, diagonals as in the grid.

    Axis parallel edges get weight d^2 = l * l* (d = 1/n), so this is the
    periodic unit resistor network; the core loop is the letter a1 (translation by the
    circumference).  Its extremal length is c / (h + 1/n).
    """
    cols, rows = int(round(circumference * n)), int(round(height * n))
    if cols < 3 or rows < 1 or abs(cols - circumference * n) > 1e-9 or abs(rows - height * n) > 1e-9:
        raise MeshError("circumference and height must be multiples of 1/n")
    d = 1.0 / n
    pts, links, idx = [], [], {}
    for j in range(rows + 1):
        for i in range(cols + 1):
            idx[i, j] = len(pts)
            pts.append(complex(i * d, j * d))
        links.append((idx[0, j], idx[cols, j], 1))   # z + c = a1(z)
    faces = []
    for j in range(rows):
        for i in range(cols):
            a, b, c, e = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            faces += [(a, b, c), (a, c, e)]
    pts = np.array(pts)
    mesh = _flat_mesh(pts, faces, links, d)
    diag = np.array([abs(abs(pts[a] - pts[b]) - d) > 1e-9 for a, b in mesh.pedges[mesh.edge_rep]])
    mesh.edge_weight = np.where(diag, 0.0, d * d)
    mesh.edge_length = np.where(diag, 0.0, d)
    mesh.tags.update(kind="cylinder", circumference=circumference, height=height, n=n,
                     diagonal=np.flatnonzero(diag))
    return mesh


# --- text interchange --------------------------------------------------------------------------

def dump_mesh(mesh: SurfaceMesh) -> str:
    lines = ["# liouville-ext mesh v1", f"h {float(mesh.h)!r}"]
    if mesh.surface is not None:
        lines.append(f"genus {mesh.surface.genus}")
    for z, c, w in zip(mesh.points, mesh.vclass, mesh.vword):
        lines.append(f"v {float(z.real)!r} {float(z.imag)!r} {c} {format_word(w) or '-'}")
    for f in mesh.faces:
        lines.append(f"f {f[0]} {f[1]} {f[2]}")
    for (a, b), e in zip(mesh.pedges, mesh.eclass):
        lines.append(f"e {a} {b} {e}")
    for e in range(mesh.n_edges):
        lines.append(f"q {e} {float(mesh.edge_length[e])!r} {float(mesh.edge_weight[e])!r}")
    return "\n".join(lines) + "\n"


def load_mesh(text: str, surface: SurfacePresentation | None = None) -> SurfaceMesh:
    pts, cls, words, faces, pedges, ecls, qlen, qw = [], [], [], [], [], [], {}, {}
    h = None
    for line in text.splitlines():
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        if tok[0] == "h":
            h = float(tok[1])
        elif tok[0] == "genus":
            if surface is not None and surface.genus != int(tok[1]):
                raise MeshError("mesh genus does not match the surface")
        elif tok[0] == "v":
            pts.append(complex(float(tok[1]), float(tok[2])))
            cls.append(int(tok[3]))
            words.append(() if tok[4] == "-" else parse_word(" ".join(tok[4:])))
        elif tok[0] == "f":
            faces.append([int(t) for t in tok[1:4]])
        elif tok[0] == "e":
            pedges.append([int(tok[1]), int(tok[2])])
            ecls.append(int(tok[3]))
        elif tok[0] == "q":
            qlen[int(tok[1])] = float(tok[2])
            qw[int(tok[1])] = float(tok[3])
        else:
            raise MeshError(f"unknown mesh record {tok[0]!r}")
    n = len(qlen)
    return SurfaceMesh(np.array(pts), np.array(faces), np.array(cls), tuple(words), np.array(pedges),
                       np.array(ecls), np.array([qlen[i] for i in range(n)]),
                       np.array([qw[i] for i in range(n)]), h, surface)
