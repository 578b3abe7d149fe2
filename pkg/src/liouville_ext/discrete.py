"""Discrete extremal length on a triangulated surface.

An edge metric is a nonnegative density ``x`` per quotient edge: a path has
length ``sum(edge_length * x)`` and the metric has area
``sum(edge_weight * x**2)``.  Extremal length of a weighted family is the
reciprocal of the least area among metrics giving every admissible choice of
representatives weighted length at least one; this is a strictly convex QP.
Representatives are paths in a cover graph of each class:

* closed curves on X use a band around the curve's geodesic in the annular
  cover, described in Fermi coordinates ``(s, r)`` about the axis;
* the flat cylinder is its own annulus;
* arc families use plain multi-source Dijkstra between boundary sets.

By default all paths of a cover graph are constrained at once through node
potentials ``phi``: an edge from ``a`` to ``b`` with winding ``w`` needs
``|phi_b - phi_a + w t| <= edge_length * x``, so every loop of winding one
has length at least ``t``.  The cover is widened until a shortest path
search one doubling wider finds nothing shorter.  The multipliers of these
rows form a flow whose cycles are the taut paths carrying the metric.
Cutting planes over explicit shortest paths remain available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import clarabel
import numpy as np
from scipy.optimize import nnls
from scipy.sparse import coo_matrix, csc_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .flow import ClosedGeodesic, WeightedMultiCurve, closed_geodesic, lorentz_matrix
from .geometry import from_hyperboloid, to_hyperboloid
from .mesh import SurfaceMesh
from .surface import SurfaceError, Word, cyclic_reduce, free_reduce, geodesic_length, invert, normalize_point

_J = np.array([-1.0, 1.0, 1.0])
CUT_TOL = 1e-7
BAND_STEP = 0.25


class DiscreteError(SurfaceError):
    pass


class TruncationError(DiscreteError):
    pass


class ConvergenceError(DiscreteError):
    def __init__(self, msg, bounds=None):
        super().__init__(msg)
        self.bounds = bounds


# --- paths ------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgePath:
    """Sequence of quotient edges; ``closed`` loops carry their deck word."""

    edges: tuple[int, ...]
    vertices: tuple[int, ...]          # quotient vertices, len(edges) + 1
    closed: bool = True
    word: Word = ()
    tag: str = ""

    def usage(self, n_edges: int) -> np.ndarray:
        return np.bincount(np.asarray(self.edges, dtype=int), minlength=n_edges).astype(float)

    def length(self, mesh: SurfaceMesh, x) -> float:
        e = np.asarray(self.edges, dtype=int)
        return float(np.sum(mesh.edge_length[e] * np.asarray(x)[e]))

    def __len__(self):
        return len(self.edges)


def path_word(mesh: SurfaceMesh, vertices, edges) -> Word:
    """Deck word of an edge path: the product of its edge labels."""
    w: list[int] = []
    for a, e in zip(vertices[:-1], edges):
        u, v = mesh.edge_ends[e]
        lab = mesh.edge_label[e]
        w.extend(lab if a == u else invert(lab))
    return free_reduce(w)


# --- winding graphs --------------------------------------------------------------------

@dataclass(eq=False)
class WindingGraph:
    """Graph whose edges map to quotient edges and may cross a seam (winding +-1)."""

    n_nodes: int
    tail: np.ndarray
    head: np.ndarray
    qedge: np.ndarray
    wind: np.ndarray
    node_vertex: np.ndarray            # node -> quotient vertex
    radius: np.ndarray | None = None   # |r| per node for banded covers

    def restrict(self, keep: np.ndarray) -> "WindingGraph":
        idx = np.full(self.n_nodes, -1)
        idx[keep] = np.arange(int(keep.sum()))
        ok = keep[self.tail] & keep[self.head]
        return WindingGraph(int(keep.sum()), idx[self.tail[ok]], idx[self.head[ok]], self.qedge[ok],
                            self.wind[ok], self.node_vertex[keep],
                            None if self.radius is None else self.radius[keep])


def _levels_graph(g: WindingGraph, cost: np.ndarray, levels=(-1, 0, 1, 2)):
    n = g.n_nodes
    lo = levels[0]
    rows, cols, vals, qe = [], [], [], []
    for lev in levels:
        tgt = lev + g.wind
        ok = (tgt >= levels[0]) & (tgt <= levels[-1])
        rows.append((lev - lo) * n + g.tail[ok])
        cols.append((tgt[ok] - lo) * n + g.head[ok])
        vals.append(cost[g.qedge[ok]])
        qe.append(g.qedge[ok])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    N = n * len(levels)
    # zero costs would vanish from a sparse matrix; a tiny floor keeps the edge
    mat = coo_matrix((np.maximum(vals, 1e-300), (rows, cols)), shape=(N, N)).tocsr()
    return mat, lo


def winding_cycles(g: WindingGraph, cost: np.ndarray, k: int = 1):
    """Least cost closed walks of winding one, through distinct seam vertices.

    Returns up to ``k`` pairs (length, level node list), cheapest first; the
    first is a shortest winding one walk of the whole graph.
    """
    seam = g.wind != 0
    if not np.any(seam):
        raise DiscreteError("graph has no seam edges")
    sources = np.unique(np.concatenate([g.tail[seam], g.head[seam]]))
    mat, lo = _levels_graph(g, cost)
    n = g.n_nodes
    starts = (0 - lo) * n + sources
    ends = (1 - lo) * n + sources
    dist, pred = dijkstra(mat, directed=False, indices=starts, return_predecessors=True)
    d = dist[np.arange(len(sources)), ends]
    if not np.isfinite(d.min()):
        raise DiscreteError("no closed walk of winding one in the graph")
    out = []
    for i in np.argsort(d, kind="stable")[: max(1, 16 * k)]:
        if not np.isfinite(d[i]):
            break
        nodes = [int(ends[i])]
        while nodes[-1] != starts[i]:
            nodes.append(int(pred[i, nodes[-1]]))
        nodes.reverse()
        out.append((float(d[i]), nodes))
    return out, n, lo


def _edge_lookup(g: WindingGraph):
    table = {}
    for i, (a, b, w) in enumerate(zip(g.tail, g.head, g.wind)):
        table[(int(a), int(b), int(w))] = i
        table[(int(b), int(a), -int(w))] = i
    return table


def _walk_to_path(mesh: SurfaceMesh, g: WindingGraph, level_nodes, n, lo, closed=True, tag=""):
    table = _edge_lookup(g)
    base = [v % n for v in level_nodes]
    lev = [v // n + lo for v in level_nodes]
    edges = []
    for a, b, la, lb in zip(base[:-1], base[1:], lev[:-1], lev[1:]):
        edges.append(int(g.qedge[table[(a, b, lb - la)]]))
    verts = [int(g.node_vertex[v]) for v in base]
    word = path_word(mesh, verts, edges) if closed and mesh.surface is not None else ()
    return EdgePath(tuple(edges), tuple(verts), closed, cyclic_reduce(word) if word else (), tag)


# --- the annular band of a closed curve on X --------------------------------------------------

def _fermi(x, p, u, n):
    """(s, r) of hyperboloid points about the geodesic through (p, u) with normal n."""
    a = -(x * _J) @ p
    b = (x * _J) @ u
    r = np.arcsinh((x * _J) @ n)
    return np.arctanh(np.clip(b / a, -1 + 1e-16, 1 - 1e-16)), r


class _Frames:
    """The closed geodesic cut into arcs, each with a local frame and transition to the next."""

    def __init__(self, mesh: SurfaceMesh, cg: ClosedGeodesic):
        s = mesh.surface
        a = cg.arcs
        self.m = len(a)
        self.p, self.u = a.p, a.u
        self.len = a.length
        self.offset = cg.entry_offsets
        self.total = cg.length
        n = np.cross(a.p, a.u) * _J                 # Minkowski normal, spacelike
        n = n / np.sqrt(np.einsum("ij,ij->i", n * _J, n))[:, None]
        self.n = n
        self.step = []
        for k in a.exit_side:
            if k >= 0:
                self.step.append(lorentz_matrix(s.side_map(int(k)).inverse()))
            else:
                self.step.append(np.eye(3))
        self.unstep = [np.linalg.inv(L) for L in self.step]

    def canonical(self, j, x, eps):
        """Move a point to the frame whose arc contains its foot; returns (j, x, eps, wraps, s, r)."""
        wraps = 0
        moved = 0                      # last move, so rounding at a frame seam cannot bounce
        for _ in range(4 * self.m + 8):
            s, r = _fermi(x[None, :], self.p[j], self.u[j], self.n[j])
            s, r = float(s[0]), float(r[0])
            if s >= self.len[j] and not (moved < 0 and s < self.len[j] + 1e-9):
                x, eps = self.step[j] @ x, self.step[j] @ eps
                j += 1
                if j == self.m:
                    j, wraps = 0, wraps + 1
                moved = 1
            elif s < 0.0 and not (moved > 0 and s > -1e-9):
                j -= 1
                if j < 0:
                    j, wraps = self.m - 1, wraps - 1
                x, eps = self.unstep[j] @ x, self.unstep[j] @ eps
                moved = -1
            else:
                s = min(max(s, 0.0), self.len[j])
                return j, x, eps, wraps, self.offset[j] + s, r
        raise DiscreteError("frame search did not settle")


def annular_band(mesh: SurfaceMesh, word, radius: float, cg: ClosedGeodesic | None = None) -> WindingGraph:
    """Cover graph of the band |r| <= radius around the geodesic of ``word`` in the annular cover."""
    s = mesh.surface
    if s is None:
        raise DiscreteError("annular bands need a hyperbolic mesh")
    cg = cg or closed_geodesic(s, word)
    fr = _Frames(mesh, cg)
    adj = mesh.adjacency()
    lab_mat = {}
    # pieces of a cut mesh share the parent's base points and words
    parent = mesh.tags.get("parent", mesh)
    qv = mesh.tags["qvertex"] if parent is not mesh else np.arange(mesh.n_vertices)
    rep_x = to_hyperboloid(parent.points[parent.vrep[qv]])

    def label_matrix(lab):
        if lab not in lab_mat:
            lab_mat[lab] = lorentz_matrix(s.evaluate(lab))
        return lab_mat[lab]

    copies = [np.flatnonzero(parent.vclass == q) for q in qv]

    def snap(B, x):
        z0, w = normalize_point(s, complex(from_hyperboloid(x)), tol=1e-9)
        cut = copies[B]
        v = cut[np.argmin(np.abs(parent.points[cut] - z0))]
        eps = label_matrix(free_reduce(w + parent.vword[v]))
        return eps @ rep_x[B], eps

    nodes: list[tuple] = []          # (vertex, frame, eps)
    coords: list[tuple[float, float]] = []
    index: dict = {}
    scale = 1e6

    def lookup(v, sg, r):
        kx, ky = int(round(sg * scale)), int(round(r * scale))
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                i = index.get((v, kx + dx, ky + dy))
                if i is not None:
                    return i
        return None

    def find(v, sg, r):
        """Index of a stored node at (s, r), and the winding picked up matching it across the seam."""
        i = lookup(v, sg, r)
        if i is not None:
            return i, 0
        # the seam: s near the total length is s near zero one turn on
        if sg > fr.total - 1e-5:
            i = lookup(v, sg - fr.total, r)
            if i is not None:
                return i, 1
        if sg < 1e-5:
            i = lookup(v, sg + fr.total, r)
            if i is not None:
                return i, -1
        return None, 0

    def add(v, j, x, eps, sg, r):
        i = len(nodes)
        nodes.append((v, j, eps))
        coords.append((sg, r))
        index[(v, int(round(sg * scale)), int(round(r * scale)))] = i
        return i

    # seeds: polygon vertices near the first arc
    pos = to_hyperboloid(mesh.points)
    ss, rr = _fermi(pos, fr.p[0], fr.u[0], fr.n[0])
    seeds = np.flatnonzero((np.abs(rr) <= radius) & (ss >= 0) & (ss < fr.len[0]))
    if not len(seeds):
        seeds = [int(np.argmin(np.abs(rr) + np.abs(ss)))]
    queue = []
    for v in seeds:
        eps = lorentz_matrix(s.evaluate(mesh.vword[v]))
        A = int(mesh.vclass[v])
        j, x, eps, _, sg, r = fr.canonical(0, eps @ rep_x[A], eps)
        if abs(r) <= radius and find(A, sg, r)[0] is None:
            queue.append(add(A, j, x, eps, sg, r))
    tail, head, qedge, wind = [], [], [], []
    seen_edges = set()
    qi = 0
    while qi < len(queue):
        i = queue[qi]
        qi += 1
        A, j, eps = nodes[i]
        for e, B, lab, _ in adj[A]:
            eps2 = eps @ label_matrix(lab)
            j2, x2, eps2, wr, sg, r = fr.canonical(j, eps2 @ rep_x[B], eps2)
            if abs(r) > radius + 1e-6:
                continue
            # chained products drift; rebuild the isometry from a word so nodes stay on the orbit
            x2, eps2 = snap(B, x2)
            sg, r = _fermi(x2[None, :], fr.p[j2], fr.u[j2], fr.n[j2])
            sg, r = fr.offset[j2] + float(sg[0]), float(r[0])
            if abs(r) > radius:
                continue
            k, dw = find(B, sg, r)
            wr += dw
            if k is None:
                k = add(B, j2, x2, eps2, sg, r)
                queue.append(k)
            key = (min(i, k), max(i, k), e)
            if key in seen_edges:
                continue
            seen_edges.add(key)
            tail.append(i)
            head.append(k)
            qedge.append(e)
            wind.append(wr)
    coords = np.array(coords)
    g = WindingGraph(len(nodes), np.array(tail), np.array(head), np.array(qedge), np.array(wind),
                     np.array([v for v, _, _ in nodes]), np.abs(coords[:, 1]))
    return g


def _anchored_component(g: WindingGraph, anchor) -> WindingGraph:
    """The component of the node nearest the axis among those over ``anchor`` vertices."""
    on = np.flatnonzero(np.isin(g.node_vertex, anchor))
    if not len(on):
        raise DiscreteError("anchor vertices do not meet the band")
    start = on[np.argmin(g.radius[on])]
    mat = coo_matrix((np.ones(len(g.tail)), (g.tail, g.head)), shape=(g.n_nodes,) * 2)
    lab = connected_components(mat, directed=False)[1]
    return g.restrict(lab == lab[start])


# --- shortest homotopic representatives ------------------------------------------------------

def _distinct(cands, k):
    """The cheapest candidate plus further ones edge disjoint from those kept."""
    used, out = set(), []
    for path, length in cands:
        if out and used.intersection(path.edges):
            continue
        used.update(path.edges)
        out.append((path, length))
        if len(out) == k:
            break
    return out


class LoopClass:
    """Shortest loops in the free homotopy class of a word on X, with a cached band.

    The band radius doubles from ``r0`` until the shortest length is stable;
    if it is still dropping at ``r_max`` a TruncationError is raised.
    """

    def __init__(self, mesh: SurfaceMesh, word, r0: float = 2 * BAND_STEP, r_max: float = 4.0, anchor=None):
        self.mesh = mesh
        self.anchor = None if anchor is None else np.unique(np.asarray(anchor, dtype=int))
        self.word = cyclic_reduce(word)
        if not self.word:
            raise DiscreteError("trivial class")
        self.cg = closed_geodesic(mesh.surface, self.word)
        self.r0 = r0
        self.r_max = r_max
        self._band = None
        self._band_radius = 0.0
        self.radius_used = r0

    def band(self, radius):
        if radius > self._band_radius + 1e-12:
            self._band = annular_band(self.mesh, self.word, radius, self.cg)
            self._band_radius = radius
        g = self._band
        if abs(radius - self._band_radius) >= 1e-12:
            g = g.restrict(g.radius <= radius)
        if self.anchor is not None:
            g = _anchored_component(g, self.anchor)
        return g

    def _paths(self, g, cost, k):
        walks, n, lo = winding_cycles(g, cost, k)
        return _distinct([(_walk_to_path(self.mesh, g, w, n, lo, True, "loop"), L) for L, w in walks], k)

    def candidates(self, x, k: int = 1, threshold: float = -math.inf):
        """Up to ``k`` short loops; stops widening once one is shorter than ``threshold``."""
        cost = self.mesh.edge_length * np.asarray(x, dtype=float)
        radius = self.r0
        prev = None
        while True:
            cands = self._paths(self.band(radius), cost, k)
            if cands[0][1] < threshold:
                return cands
            if prev is not None and cands[0][1] >= prev[0][1] * (1 - 1e-12):
                self.radius_used = radius / 2
                return prev
            prev = cands
            if radius * 2 > self.r_max + 1e-12:
                raise TruncationError(f"shortest length still dropping at cover radius {radius}")
            radius *= 2

    def shortest(self, x) -> tuple[EdgePath, float]:
        return self.candidates(x, 1)[0]

    def block(self, level: int):
        radius = self.r0 * 2 ** level
        if radius > self.r_max + 1e-12:
            return None
        return Block(self.band(radius), radius=radius)

    def certify(self, x, level: int):
        """Shortest loop in the band one doubling wider than ``level``."""
        radius = self.r0 * 2 ** (level + 1)
        if radius > self.r_max + 1e-12:
            raise TruncationError(f"cannot widen the cover beyond radius {self.r_max}")
        cost = self.mesh.edge_length * np.asarray(x, dtype=float)
        return self._paths(self.band(radius), cost, 1)[0]


class CylinderLoop:
    """Core loops of a flat cylinder fixture (the cylinder is its own annulus)."""

    def __init__(self, mesh: SurfaceMesh):
        self.mesh = mesh
        wind = np.array([sum(lab) for lab in mesh.edge_label])
        ok = np.flatnonzero(mesh.edge_length > 0)
        self.graph = WindingGraph(mesh.n_vertices, mesh.edge_ends[ok, 0], mesh.edge_ends[ok, 1],
                                  ok, wind[ok], np.arange(mesh.n_vertices))

    def candidates(self, x, k: int = 1, threshold: float = -math.inf):
        cost = self.mesh.edge_length * np.asarray(x, dtype=float)
        walks, n, lo = winding_cycles(self.graph, cost, k)
        return _distinct([(_walk_to_path(self.mesh, self.graph, w, n, lo, True, "core"), L) for L, w in walks], k)

    def shortest(self, x):
        return self.candidates(x, 1)[0]

    def block(self, level: int):
        return Block(self.graph) if level == 0 else None

    def certify(self, x, level: int):
        return self.shortest(x)


class ArcClass:
    """Arcs from one vertex set to another inside a mesh (rel boundary family)."""

    def __init__(self, mesh: SurfaceMesh, sources, targets, allowed_edges=None, tag="arc"):
        self.mesh = mesh
        self.sources = np.unique(np.asarray(sources, dtype=int))
        self.targets = np.unique(np.asarray(targets, dtype=int))
        # zero length edges are bookkeeping only (grid diagonals) and carry no paths
        self.allowed = (mesh.edge_length > 0) if allowed_edges is None else np.asarray(allowed_edges, dtype=bool)
        self.tag = tag

    def candidates(self, x, k: int = 1, threshold: float = -math.inf):
        m = self.mesh
        cost = m.edge_length * np.asarray(x, dtype=float)
        ok = self.allowed
        u, v = m.edge_ends[ok, 0], m.edge_ends[ok, 1]
        ids = np.flatnonzero(ok)
        mat = coo_matrix((np.maximum(cost[ok], 1e-300), (u, v)), shape=(m.n_vertices,) * 2).tocsr()
        dist, pred, _ = dijkstra(mat, directed=False, indices=self.sources, min_only=True,
                                 return_predecessors=True)
        d = dist[self.targets]
        if not np.isfinite(d.min()):
            raise DiscreteError("targets unreachable from sources")
        table = {}
        for e, a, b in zip(ids, u, v):
            for key in ((int(a), int(b)), (int(b), int(a))):
                if key not in table or cost[e] < cost[table[key]]:
                    table[key] = int(e)
        out = []
        for i in np.argsort(d, kind="stable")[: 16 * k]:
            verts = [int(self.targets[i])]
            while pred[verts[-1]] >= 0:
                verts.append(int(pred[verts[-1]]))
            verts.reverse()
            edges = tuple(table[(a, b)] for a, b in zip(verts[:-1], verts[1:]))
            out.append((EdgePath(edges, tuple(verts), False, (), self.tag), float(d[i])))
        return _distinct(out, k)

    def shortest(self, x):
        return self.candidates(x, 1)[0]

    def block(self, level: int):
        if level:
            return None
        m = self.mesh
        ok = np.flatnonzero(self.allowed)
        g = WindingGraph(m.n_vertices, m.edge_ends[ok, 0], m.edge_ends[ok, 1], ok, np.zeros(len(ok), dtype=int),
                         np.arange(m.n_vertices))
        return Block(g, sources=self.sources, targets=self.targets)

    def certify(self, x, level: int):
        return self.shortest(x)


@dataclass(eq=False)
class Block:
    """Potential constraints of one class: |phi(b) - phi(a) + wind * t| <= l_e x_e on every edge.

    Loops: ``t`` is the period of the multivalued potential.  Arcs: the
    potential vanishes on ``sources`` and is at least ``t`` on ``targets``.
    """

    graph: WindingGraph
    sources: np.ndarray | None = None
    targets: np.ndarray | None = None
    radius: float = math.inf


def shortest_homotopic(mesh: SurfaceMesh, x, cls) -> tuple[EdgePath, float]:
    """Shortest representative of a class (a word, or a class object with ``shortest``)."""
    if not hasattr(cls, "shortest"):
        cls = LoopClass(mesh, cls)
    return cls.shortest(x)


def snap_curve(mesh: SurfaceMesh, c: WeightedMultiCurve) -> list[tuple[EdgePath, float]]:
    """Edge loops for each component: shortest representatives for hyperbolic edge lengths."""
    out = []
    ones = np.ones(mesh.n_edges)
    for word, weight in c.components:
        path, _ = LoopClass(mesh, word).shortest(ones)
        out.append((path, weight))
    return out


# --- the quadratic program ------------------------------------------------------------------------

def solve_ldp(A: np.ndarray, D: np.ndarray):
    """min sum(D x^2) subject to A x >= 1, as a least distance program.

    Lawson and Hanson's reduction to nonnegative least squares; returns
    (x, lam) with ``lam`` the multipliers of the rows of ``A``.
    """
    live = D > 0
    root = np.zeros_like(D)
    root[live] = 1.0 / np.sqrt(D[live])
    G = A[:, live] * root[live]
    m = len(A)
    E = np.vstack([G.T, np.ones((1, m))])
    f = np.zeros(E.shape[0])
    f[-1] = 1.0
    u, _ = nnls(E, f, maxiter=50 * max(m, 10))
    r = E @ u - f
    if not abs(r[-1]) > 1e-14:
        raise DiscreteError("constraints are infeasible")
    x = np.zeros_like(D)
    x[live] = root[live] * (-r[:-1] / r[-1])
    return x, 2.0 * u / (-r[-1])


def solve_potential(mesh: SurfaceMesh, blocks, weights, shuffle_seed=None, tol: float = 1e-10):
    """min sum(w x^2) over edge metrics with weighted class lengths sum(c_i t_i) >= 1.

    Each block carries potentials whose jumps are dominated by the metric,
    so ``t_i`` is a lower bound for every path of class i in the block's
    graph.  Solved as a sparse QP by an interior point method.  Returns
    (x, t, kkt_residual, flows) with ``flows`` the multipliers of each
    block as a net flow along its edges, tail to head.
    """
    live = np.flatnonzero(mesh.edge_length > 0)
    w = mesh.edge_weight[live]
    if np.any(w <= 0):
        raise DiscreteError("edges of positive length need positive weight")
    col = np.full(mesh.n_edges, -1)
    col[live] = np.arange(len(live))
    nx = len(live)
    offs, nv = [], nx
    for b in blocks:
        offs.append(nv)
        nv += 1 + b.graph.n_nodes
    zr, zc, zv, zb = [], [], [], []      # equality rows
    ir, ic, iv, ib = [], [], [], []      # inequality rows A z <= b
    neq = nin = 0
    block_rows = []
    for b, o in zip(blocks, offs):
        g = b.graph
        tcol, phi = o, o + 1
        block_rows.append((nin, len(g.tail)))
        if b.sources is None:
            fixed = np.array([0])
        else:
            fixed = np.asarray(b.sources)
        k = len(fixed)
        zr.append(neq + np.arange(k)); zc.append(phi + fixed); zv.append(np.ones(k)); zb.append(np.zeros(k))
        neq += k
        m = len(g.tail)
        lens = mesh.edge_length[g.qedge]
        xcol = col[g.qedge]
        for sign in (1.0, -1.0):
            rows = nin + np.arange(m)
            ir += [rows, rows, rows, rows]
            ic += [phi + g.head, phi + g.tail, np.full(m, tcol), xcol]
            iv += [np.full(m, sign), np.full(m, -sign), sign * g.wind.astype(float), -lens]
            ib.append(np.zeros(m))
            nin += m
        if b.targets is not None:
            tg = np.asarray(b.targets)
            rows = nin + np.arange(len(tg))
            ir += [rows, rows]
            ic += [np.full(len(tg), tcol), phi + tg]
            iv += [np.ones(len(tg)), -np.ones(len(tg))]
            ib.append(np.zeros(len(tg)))
            nin += len(tg)
    ir.append(np.full(len(blocks), nin)); ic.append(np.array(offs)); iv.append(-np.asarray(weights, dtype=float))
    ib.append(np.array([-1.0]))
    nin += 1
    ir.append(nin + np.arange(nx)); ic.append(np.arange(nx)); iv.append(-np.ones(nx)); ib.append(np.zeros(nx))
    nin += nx
    rows = np.concatenate(zr + [neq + r for r in ir])
    cols = np.concatenate(zc + ic)
    vals = np.concatenate(zv + iv)
    bvec = np.concatenate(zb + ib)
    order = np.arange(neq + nin)
    if shuffle_seed is not None:
        rng = np.random.default_rng(shuffle_seed)
        order = np.concatenate([rng.permutation(neq), neq + rng.permutation(nin)])
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    A = csc_matrix((vals, (inv[rows], cols)), shape=(neq + nin, nv))
    b_perm = np.empty_like(bvec)
    b_perm[inv] = bvec
    P = csc_matrix((2.0 * w, (np.arange(nx), np.arange(nx))), shape=(nv, nv))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.max_iter = 400
    sol = clarabel.DefaultSolver(P, np.zeros(nv), A, b_perm, [clarabel.ZeroConeT(neq), clarabel.NonnegativeConeT(nin)],
                                 settings).solve()
    if str(sol.status) not in ("Solved", "AlmostSolved"):
        raise ConvergenceError(f"quadratic program: {sol.status}")
    z = np.asarray(sol.x)
    y = np.asarray(sol.z)
    s = np.asarray(sol.s)
    r_stat = np.linalg.norm(P @ z + A.T @ y) / max(1.0, np.linalg.norm(A.T @ y))
    r_feas = max(float(np.max(np.abs((A @ z + s - b_perm)))), float(np.max(-s[neq:], initial=0.0)))
    r_comp = float(np.max(np.abs(y[neq:] * s[neq:]), initial=0.0))
    x = np.zeros(mesh.n_edges)
    x[live] = np.maximum(z[:nx], 0.0)
    y_in = y[inv][neq:]
    flows = [y_in[r0:r0 + m] - y_in[r0 + m:r0 + 2 * m] for r0, m in block_rows]
    return x, np.array([z[o] for o in offs]), max(r_stat, r_feas, r_comp), flows


@dataclass
class ExtEstimate:
    value: float                  # l_rho(family)^2 / Area for the returned metric
    lower: float                  # certified by the returned metric
    upper: float                  # from the relaxed program
    iterations: int
    n_cuts: int                   # constraint count of the final program
    kkt_residual: float
    converged: bool
    history: list = field(default_factory=list)
    status: str = "certified"     # certified, stabilized or truncated
    escape: float | None = None   # relative shortfall found in the wider cover

    def report(self) -> str:
        lines = [f"ext {self.value!r}", f"bounds {self.lower!r} {self.upper!r}", f"iterations {self.iterations}",
                 f"constraints {self.n_cuts}", f"kkt_residual {self.kkt_residual:.3e}",
                 f"converged {self.converged}", f"status {self.status}"]
        if self.escape is not None:
            lines.append(f"escape {self.escape:.3e}")
        return "\n".join(lines) + "\n"


@dataclass
class ExtremalResult:
    metric: np.ndarray            # area normalized to one
    estimate: ExtEstimate
    active_paths: list            # constraint tuples of (EdgePath, weight) that are tight
    multipliers: np.ndarray | None
    family: list = field(repr=False, default_factory=list)
    blocks: list = field(repr=False, default_factory=list)
    method: str = "potential"
    periods: np.ndarray | None = None     # per class lower bound t_i for the returned metric
    flows: list = field(repr=False, default_factory=list)
    levels: list = field(default_factory=list)
    active_class: list | None = None


def _family_length(mesh, family, x, k: int = 1, threshold: float = -math.inf):
    """Weighted shortest length, plus up to ``k`` candidate cut tuples as (usage, paths)."""
    total = 0.0
    per = []
    for cls, weight in family:
        cands = cls.candidates(x, k, threshold / weight / len(family)) if k > 1 else [cls.shortest(x)]
        per.append(cands)
        total += weight * cands[0][1]
    cuts = []
    for j in range(max(len(c) for c in per)):
        paths = [(c[min(j, len(c) - 1)][0], w) for c, (_, w) in zip(per, family)]
        use = np.zeros(mesh.n_edges)
        for p, w in paths:
            use += w * p.usage(mesh.n_edges) * mesh.edge_length
        cuts.append((use, paths))
    return total, cuts


def _check_family(family):
    if not family:
        raise DiscreteError("need at least one class")
    for _, w in family:
        if not w > 0:
            raise DiscreteError("weights must be positive")


def extremal_solve(mesh: SurfaceMesh, family, method: str = "potential", level: int = 0, shuffle_seed=None,
                   tol: float = CUT_TOL, stabilize: float = 0.01, widen: bool = True, certify: bool = True,
                   **kw) -> ExtremalResult:
    """Extremal metric of a weighted family of classes.

    ``family`` is a list of (class, weight); classes come from LoopClass,
    CylinderLoop or ArcClass.  The default method solves the program over
    all paths of each class's cover graph at once.  After each solve a
    shortest path search in a cover one doubling wider looks for violated
    constraints; the covers of violated classes are widened until none is
    found (status "certified") or the extremal length moves by less than
    ``stabilize`` between consecutive widenings (status "stabilized").
    With ``widen=False`` a single solve is returned (status "truncated" or
    "certified").  ``method="cuts"`` adds violated shortest paths one round
    at a time.
    """
    _check_family(family)
    if method == "cuts":
        return _solve_cuts(mesh, family, shuffle_seed=shuffle_seed, tol=tol, **kw)
    if method != "potential":
        raise DiscreteError(f"unknown method {method!r}")
    weights = [w for _, w in family]
    levels = [level] * len(family)
    history = []
    prev = None
    status = "truncated"
    ell = None
    for it in range(16):
        blocks = [cls.block(lv) for (cls, _), lv in zip(family, levels)]
        if any(b is None for b in blocks):
            raise TruncationError("cover truncation exhausted before the constraints stabilized")
        x, t, kkt, flows = solve_potential(mesh, blocks, weights, shuffle_seed)
        area = float(mesh.edge_weight @ x ** 2)
        if not area > 0:
            raise DiscreteError("degenerate metric")
        history.append((sum(len(b.graph.tail) for b in blocks), 1.0 / area))
        if prev is not None and abs(1.0 / area - prev) <= stabilize / area:
            # the last certification belonged to the previous metric
            status, ell = "stabilized", None
            break
        if not certify:
            break
        try:
            found = [cls.certify(x, lv) for (cls, _), lv in zip(family, levels)]
        except TruncationError:
            if widen:
                raise
            break
        ell = sum(w * L for (_, L), w in zip(found, weights))
        if ell >= 1.0 - tol:
            status = "certified"
            break
        if not widen:
            break
        prev = 1.0 / area
        # widen the covers of the classes whose paths came out short
        for i, ((_, L), ti) in enumerate(zip(found, t)):
            if L < ti * (1.0 - tol):
                levels[i] += 1
    else:
        raise ConvergenceError("cover widening did not settle", (None, 1.0 / area))
    n_rows = sum(2 * len(b.graph.tail) for b in blocks)
    lower = min(ell, 1.0) ** 2 / area if ell is not None else None
    est = ExtEstimate(value=1.0 / area, lower=lower, upper=1.0 / area, iterations=it + 1, n_cuts=n_rows,
                      kkt_residual=kkt, converged=status != "truncated", history=history, status=status,
                      escape=None if ell is None else max(0.0, 1.0 - ell))
    return ExtremalResult(x / math.sqrt(area), est, None, None, list(family), blocks, "potential",
                          periods=t / math.sqrt(area), flows=flows, levels=levels)


def _flow_cycles(g: WindingGraph, flow, sources=None, targets=None, rel_tol: float = 1e-7, limit: int = 100000):
    """Split a block's dual flow into closed walks (loops) or source to target walks (arcs).

    Returns a list of (node list, edge index list, amount).
    """
    flow = np.asarray(flow, dtype=float)
    top = float(np.max(np.abs(flow), initial=0.0))
    if top <= 0:
        return []
    eps = rel_tol * top
    n = g.n_nodes
    tail = np.where(flow > 0, g.tail, g.head)
    head = np.where(flow > 0, g.head, g.tail)
    amount = np.abs(flow)
    edges = list(np.flatnonzero(amount > eps))
    tails = list(tail[edges])
    heads = list(head[edges])
    rest = list(amount[edges])
    ids = list(edges)
    hub = n
    if targets is not None:
        # close arcs into cycles through a hub node
        div = np.zeros(n + 1)
        np.add.at(div, tail[edges], amount[edges])
        np.subtract.at(div, head[edges], amount[edges])
        for v in np.asarray(targets):
            if -div[v] > eps:
                tails.append(int(v)); heads.append(hub); rest.append(-div[v]); ids.append(-1)
        for v in np.asarray(sources):
            if div[v] > eps:
                tails.append(hub); heads.append(int(v)); rest.append(div[v]); ids.append(-1)
    out = [[] for _ in range(n + 1)]
    for k, a in enumerate(tails):
        out[a].append(k)
    ptr = [0] * (n + 1)
    found = []

    def next_edge(v):
        lst = out[v]
        while ptr[v] < len(lst) and rest[lst[ptr[v]]] <= eps:
            ptr[v] += 1
        return lst[ptr[v]] if ptr[v] < len(lst) else None

    for start in range(n + 1):
        while len(found) < limit:
            k = next_edge(start)
            if k is None:
                break
            path_nodes, path_edges, where = [start], [], {start: 0}
            while True:
                k = next_edge(path_nodes[-1])
                if k is None:              # numerical dead end: drop what is left on this walk
                    for e in path_edges:
                        rest[e] = 0.0
                    break
                v = heads[k]
                path_edges.append(k)
                if v in where:
                    i0 = where[v]
                    cyc = path_edges[i0:]
                    amt = min(rest[e] for e in cyc)
                    for e in cyc:
                        rest[e] -= amt
                    nodes = path_nodes[i0:] + [v]
                    found.append((nodes, [ids[e] for e in cyc], amt))
                    break
                where[v] = len(path_nodes)
                path_nodes.append(v)
    return found


def active_paths(mesh: SurfaceMesh, result: ExtremalResult, rel_tol: float = 1e-6):
    """Constraint tuples carrying positive multiplier: lists of (EdgePath, weight).

    For the potential method these come from a cycle decomposition of the
    dual flow of each block, one path per tuple; ``result.active_class``
    records the class of each.
    """
    if result.active_paths is not None:
        return result.active_paths
    out, which = [], []
    for c, ((cls, w), b, f) in enumerate(zip(result.family, result.blocks, result.flows)):
        g = b.graph
        hub = g.n_nodes
        for nodes, eids, amt in _flow_cycles(g, f, b.sources, b.targets, rel_tol):
            arc = hub in nodes
            if arc:                        # rotate to hub, source ... target, hub
                k = nodes[:-1].index(hub)
                nodes = nodes[k:-1] + nodes[:k] + [hub]
                eids = eids[k:] + eids[:k]
                nodes, eids = nodes[1:-1], eids[1:-1]
            if not eids:
                continue
            wind = sum(int(g.wind[e]) if g.tail[e] == nodes[i] else -int(g.wind[e]) for i, e in enumerate(eids))
            if not arc and wind != 1:
                continue
            verts = tuple(int(g.node_vertex[v]) for v in nodes)
            edges = tuple(int(g.qedge[e]) for e in eids)
            out.append([(EdgePath(edges, verts, not arc, (), "arc" if arc else "loop"), w)])
            which.append(c)
    result.active_paths = out
    result.active_class = which
    return out


def _solve_cuts(mesh: SurfaceMesh, family, initial=None, max_cuts: int = 10000, shuffle_seed=None,
                tol: float = CUT_TOL, max_rounds: int = 2000, cuts_per_round: int = 8) -> ExtremalResult:
    """Cutting planes: the program over a growing pool of explicit paths."""
    D = np.asarray(mesh.edge_weight, dtype=float)
    rows: list[np.ndarray] = []
    tuples: list[list] = []

    def add(use, paths):
        rows.append(use)
        tuples.append(paths)

    if initial:
        for paths in initial:
            add(sum(w * p.usage(mesh.n_edges) * mesh.edge_length for p, w in paths), paths)
    else:
        ones = np.where(mesh.edge_length > 0, 1.0, 0.0)
        for use, paths in _family_length(mesh, family, ones, cuts_per_round)[1]:
            add(use, paths)
    rng = np.random.default_rng(shuffle_seed) if shuffle_seed is not None else None
    history = []
    for it in range(max_rounds):
        A = np.array(rows)
        order = rng.permutation(len(A)) if rng is not None else np.arange(len(A))
        x, lam_o = solve_ldp(A[order], D)
        lam = np.empty(len(A))
        lam[order] = lam_o
        area = float(D @ x ** 2)
        if area <= 0:
            raise DiscreteError("degenerate metric")
        upper = 1.0 / area
        ell, cuts = _family_length(mesh, family, x, cuts_per_round, 1.0 - tol)
        if ell >= 1.0 - tol:
            # early stopping may have skipped a cover widening; certify with full searches
            ell, cuts = _family_length(mesh, family, x)
        lower = ell ** 2 / area
        history.append((len(A), lower, upper))
        if ell >= 1.0 - tol:
            break
        if len(A) >= max_cuts:
            raise ConvergenceError("cut limit reached", (min(lower, upper), upper))
        for use, paths in cuts:
            if use @ x < 1.0 - tol and len(rows) < max_cuts:
                add(use, paths)
    else:
        raise ConvergenceError("round limit reached", (lower, upper))
    A = np.array(rows)
    slack = A @ x - 1.0
    kkt = max(float(np.max(np.maximum(-slack, 0.0))),
              float(np.max(np.abs(lam * slack))),
              float(np.linalg.norm(2 * D * x - lam @ A)) / max(1.0, float(np.linalg.norm(lam @ A))))
    est = ExtEstimate(value=min(ell, 1.0) ** 2 / area, lower=min(lower, upper), upper=upper, iterations=it + 1,
                      n_cuts=len(A), kkt_residual=kkt, converged=True, history=history)
    active = [tuples[i] for i in np.flatnonzero(lam > 1e-9 * max(lam.max(), 1e-300))]
    return ExtremalResult(x / math.sqrt(area), est, active, lam, list(family), [], "cuts")


def metric_area(mesh: SurfaceMesh, x) -> float:
    return float(np.sum(mesh.edge_weight * np.asarray(x) ** 2))


def family_length(mesh: SurfaceMesh, family, x) -> float:
    return _family_length(mesh, family, x)[0]


def taut_support_check(mesh: SurfaceMesh, result: ExtremalResult, tol: float = 1e-6) -> dict:
    """Every edge of positive metric should lie on an active constraint path that is taut.

    A path is taut when its length under the extremal metric is within
    ``tol`` of the least length of its class.
    """
    x = result.metric
    support = x
    if result.flows:
        # stationarity: 2 w_e x_e = l_e * (multipliers on the lifts of e); exact zeros off the support
        support = np.zeros(mesh.n_edges)
        for b, f in zip(result.blocks, result.flows):
            np.add.at(support, b.graph.qedge, np.abs(f))
        support *= mesh.edge_length / np.maximum(2.0 * mesh.edge_weight, 1e-300)
    positive = np.flatnonzero(support > tol * max(support.max(), 1e-300))
    covered = np.zeros(mesh.n_edges, dtype=bool)
    paths = active_paths(mesh, result)
    worst = 0.0
    for n, tup in enumerate(paths):
        for p, _ in tup:
            if result.periods is not None:
                slack = p.length(mesh, x) / result.periods[result.active_class[n]] - 1.0
                worst = max(worst, abs(slack))
                if abs(slack) > tol:
                    continue
            covered[list(p.edges)] = True
    missing = positive[~covered[positive]]
    return {"positive_edges": int(len(positive)), "covered": int(len(positive) - len(missing)),
            "fraction": 1.0 if not len(positive) else float(1 - len(missing) / len(positive)),
            "uncovered": missing.tolist(), "active_paths": len(paths), "max_slack": worst}


def hyperbolic_lower_bound(s, c: WeightedMultiCurve) -> float:
    """l_X(c)^2 / Area(X): the bound given by the hyperbolic metric itself."""
    ell = sum(w * geodesic_length(s, word) for word, w in c.components)
    return ell ** 2 / s.area
