"""Diameters of extremal edge metrics and the constants that bound them.

* ``discrete_diameter``: largest edge metric distance between mesh vertices;
* ``region_check``: diameter of a simply connected face set against the
  metric length of its boundary;
* ``hyperbolic_not_extremal``: an extremal solve beats the hyperbolic metric;
* pants decompositions, the constant D' and the diameter bound
  ``30 (g - 1) sqrt(D')``;
* ``singular_example``: the metric 1 / (|z| log(1/|z|)) on the disk of
  radius 1/e, of finite area and infinite diameter.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .discrete import ArcClass, DiscreteError, LoopClass, extremal_solve, hyperbolic_lower_bound
from .flow import WeightedMultiCurve
from .mesh import SurfaceMesh, boundary_loops, cut_mesh, face_incidence
from .surface import format_word, parse_word

MESH_FACTOR = 5.0          # inequalities are checked up to a factor 1 + MESH_FACTOR * h


class DecompositionError(DiscreteError):
    pass


class RegionError(DiscreteError):
    pass


# --- distances ------------------------------------------------------------------------------

def _graph(mesh: SurfaceMesh, x, support_only=False, edges=None):
    lens = mesh.edge_length * np.asarray(x, dtype=float)
    ok = np.ones(mesh.n_edges, dtype=bool) if edges is None else np.isin(np.arange(mesh.n_edges), edges)
    if support_only:
        ok &= lens > 0
    u, v = mesh.edge_ends[ok, 0], mesh.edge_ends[ok, 1]
    # zero lengths would drop out of a sparse matrix; a tiny floor keeps the edge
    return coo_matrix((np.maximum(lens[ok], 1e-300), (u, v)), shape=(mesh.n_vertices,) * 2).tocsr()


def _farthest_sources(mat, n_sources, seed):
    n = mat.shape[0]
    rng = np.random.default_rng(seed)
    src = [int(rng.integers(n))]
    near = dijkstra(mat, directed=False, indices=src[0])
    far = near.copy()
    while len(src) < n_sources:
        if not np.all(np.isfinite(near)):
            break
        nxt = int(np.argmax(near))
        if near[nxt] <= 0:
            break
        src.append(nxt)
        d = dijkstra(mat, directed=False, indices=nxt)
        near = np.minimum(near, d)
        far = np.maximum(far, d)
    return src, far


def discrete_diameter(mesh: SurfaceMesh, x, max_exact: int = 3000, n_sources: int = 500, seed: int = 0,
                      support_only: bool = False) -> float:
    """Largest edge metric distance between vertices.

    Edges of zero metric are traversed at no cost; with ``support_only``
    they are removed, so a metric supported on a non-spanning subgraph has
    infinite diameter.  Exact over all pairs up to ``max_exact`` vertices,
    otherwise the maximum over ``n_sources`` farthest point sources.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.sum(mesh.edge_weight * x ** 2) > 0:
        raise DiscreteError("metric must be nonnegative with positive area")
    mat = _graph(mesh, x, support_only)
    if mesh.n_vertices <= max_exact:
        d = dijkstra(mat, directed=False)
        return float(d.max())
    src, far = _farthest_sources(mat, n_sources, seed)
    if not np.all(np.isfinite(far)):
        return math.inf
    return float(max(dijkstra(mat, directed=False, indices=src).max(), far.max()))


# --- regions ----------------------------------------------------------------------------------

def region_topology(mesh: SurfaceMesh, faces) -> dict:
    """Euler characteristic and boundary of a face set in the quotient."""
    fv, fe = face_incidence(mesh)
    faces = np.unique(np.asarray(faces, dtype=int))
    verts = np.unique(fv[faces])
    edges, count = np.unique(fe[faces], return_counts=True)
    bnd = edges[count == 1]
    chi = len(verts) - len(edges) + len(faces)
    bv = mesh.edge_ends[bnd].ravel()
    deg = np.bincount(bv, minlength=mesh.n_vertices)[np.unique(bv)] if len(bnd) else np.array([], dtype=int)
    n_loops = 0
    if len(bnd):
        from scipy.sparse.csgraph import connected_components
        u, v = mesh.edge_ends[bnd, 0], mesh.edge_ends[bnd, 1]
        g = coo_matrix((np.ones(len(bnd)), (u, v)), shape=(mesh.n_vertices,) * 2)
        lab = connected_components(g, directed=False)[1]
        n_loops = len(np.unique(lab[np.unique(bv)]))
    disk = chi == 1 and n_loops == 1 and bool(np.all(deg == 2))
    return {"faces": faces, "vertices": verts, "edges": edges, "boundary": bnd, "euler": int(chi),
            "boundary_loops": n_loops, "disk": disk}


def region_check(mesh: SurfaceMesh, x, faces, factor: float | None = None) -> dict:
    """Diameter of a simply connected region against the metric length of its boundary.

    Distances are those of the whole surface between the region's
    vertices.  ``violation`` compares with the boundary length inflated by
    ``1 + factor * h``.
    """
    top = region_topology(mesh, faces)
    if not top["disk"]:
        raise RegionError(f"region is not a disk (Euler {top['euler']}, {top['boundary_loops']} boundary loops)")
    x = np.asarray(x, dtype=float)
    mat = _graph(mesh, x)
    d = dijkstra(mat, directed=False, indices=top["vertices"])[:, top["vertices"]]
    diam = float(d.max())
    perim = float(np.sum(mesh.edge_length[top["boundary"]] * x[top["boundary"]]))
    f = MESH_FACTOR if factor is None else factor
    return {"diameter": diam, "perimeter": perim, "n_faces": len(top["faces"]),
            "violation": diam > perim * (1 + f * mesh.h) + 1e-12}


def random_disk(mesh: SurfaceMesh, size: int, rng) -> np.ndarray:
    """A random simply connected face set grown face by face from a random seed face."""
    fv, fe = face_incidence(mesh)
    by_edge: dict[int, list] = {}
    for f, es in enumerate(fe):
        for e in es:
            by_edge.setdefault(int(e), []).append(f)
    start = int(rng.integers(mesh.n_faces))
    region = {start}
    verts = set(fv[start].tolist())
    edge_count: dict[int, int] = {int(e): 1 for e in fe[start]}
    tries = 0
    while len(region) < size and tries < 50 * size:
        tries += 1
        frontier = [f for e, c in edge_count.items() if c == 1 for f in by_edge[e] if f not in region]
        if not frontier:
            break
        f = frontier[int(rng.integers(len(frontier)))]
        # adding a face keeps a disk when it meets the region in a path of one or two boundary edges
        shared = [int(e) for e in fe[f] if edge_count.get(int(e), 0) == 1]
        new_v = [int(v) for v in fv[f] if int(v) not in verts]
        if not ((len(shared) == 1 and len(new_v) == 1) or (len(shared) == 2 and not new_v)):
            continue
        if len(np.unique(fv[f])) < 3:
            continue
        region.add(f)
        verts.update(fv[f].tolist())
        for e in fe[f]:
            edge_count[int(e)] = edge_count.get(int(e), 0) + 1
    return np.array(sorted(region))


def region_suite(mesh: SurfaceMesh, x, n_regions: int = 50, seed: int = 0, max_frac: float = 0.3,
                 factor: float | None = None) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n_regions:
        size = int(rng.integers(1, max(2, int(max_frac * mesh.n_faces))))
        faces = random_disk(mesh, size, rng)
        if not region_topology(mesh, faces)["disk"]:
            continue
        out.append(region_check(mesh, x, faces, factor))
    return out


# --- the hyperbolic metric is not extremal ------------------------------------------------------

def curve_family(mesh: SurfaceMesh, c: WeightedMultiCurve, **kw):
    return [(LoopClass(mesh, word, **kw), w) for word, w in c.components]


def hyperbolic_not_extremal(mesh: SurfaceMesh, c: WeightedMultiCurve, tol: float = 1e-6, result=None, **kw) -> dict:
    """Compare the extremal metric of ``c`` with the hyperbolic one.

    ``ext`` is l_rho(c)^2 / Area(rho) for the extremal edge metric with the
    class lengths recomputed by shortest loop searches; ``hyperbolic`` is
    l_X(c)^2 / Area(X) and ``hyperbolic_edges`` the same quotient for the
    constant edge density.  The margin is ``ext - hyperbolic``.  A solve
    already done for ``c`` may be passed as ``result``.
    """
    s = mesh.surface
    fam = curve_family(mesh, c)
    res = result if result is not None else extremal_solve(mesh, fam, **kw)
    x = res.metric
    ell = sum(w * cls.shortest(x)[1] for cls, w in fam)
    ext = ell ** 2 / float(mesh.edge_weight @ x ** 2)
    ones = np.ones(mesh.n_edges)
    ell1 = sum(w * cls.shortest(ones)[1] for cls, w in fam)
    base = hyperbolic_lower_bound(s, c)
    margin = ext - base
    return {"ext": ext, "hyperbolic": base, "hyperbolic_edges": ell1 ** 2 / mesh.total_weight(),
            "margin": margin, "relative_margin": margin / base, "conclusive": margin > tol * ext,
            "status": res.estimate.status, "result": res}


# --- pants -------------------------------------------------------------------------------------

@dataclass
class PantsDecomposition:
    """Cuffs snapped to disjoint simple edge loops and the pieces they cut out."""

    cuffs: list                    # words
    cuff_paths: list               # EdgePath per cuff
    pants: list                    # SurfaceMesh pieces
    pants_cuffs: list              # per pants: list of (cuff index, boundary vertices)
    glued: list = field(default_factory=list)   # (k, i, j, piece, boundary list)

    @property
    def names(self):
        return [format_word(w) for w in self.cuffs]


def default_cuffs(genus: int) -> list:
    if genus != 2:
        raise DecompositionError("a default pants decomposition is provided for genus 2 only")
    return [parse_word("a1"), parse_word("a2"), parse_word("a1 b1 A1 B1")]


def _label_boundaries(piece: SurfaceMesh, cuff_edges):
    qe = piece.tags["qedge"]
    out = []
    for loop in boundary_loops(piece):
        k = [i for i, es in enumerate(cuff_edges) if int(qe[loop[0]]) in es]
        if len(k) != 1:
            raise DecompositionError("boundary loop does not lie on a single cuff")
        out.append((k[0], np.unique(piece.edge_ends[loop])))
    return out


def pants_decomposition(mesh: SurfaceMesh, cuffs=None) -> PantsDecomposition:
    s = mesh.surface
    cuffs = [tuple(w) for w in (cuffs or default_cuffs(s.genus))]
    if len(cuffs) != 3 * s.genus - 3:
        raise DecompositionError(f"need {3 * s.genus - 3} cuffs")
    ones = np.ones(mesh.n_edges)
    paths = [LoopClass(mesh, w).shortest(ones)[0] for w in cuffs]
    for p in paths:
        if len(set(p.vertices[:-1])) != len(p.edges):
            raise DecompositionError("snapped cuff is not simple")
    for p, q in itertools.combinations(paths, 2):
        if set(p.vertices) & set(q.vertices):
            raise DecompositionError("snapped cuffs meet; refine the mesh")
    cuff_edges = [set(p.edges) for p in paths]
    pieces = cut_mesh(mesh, set().union(*cuff_edges))
    if len(pieces) != 2 * s.genus - 2:
        raise DecompositionError(f"cutting gave {len(pieces)} pieces")
    pc = []
    for P in pieces:
        if P.euler_characteristic != -1:
            raise DecompositionError("piece is not a pair of pants")
        lab = _label_boundaries(P, cuff_edges)
        if len(lab) != 3:
            raise DecompositionError("pants without three cuff sides")
        pc.append(lab)
    dec = PantsDecomposition(cuffs, paths, pieces, pc)
    for k in range(len(cuffs)):
        rest = set().union(*[e for i, e in enumerate(cuff_edges) if i != k])
        sides = [i for i, lab in enumerate(pc) if any(c == k for c, _ in lab)]
        i, j = sides[0], sides[-1]
        pk = pieces[i].tags["faces"][0]
        for Q in cut_mesh(mesh, rest):
            if pk in set(Q.tags["faces"].tolist()):
                dec.glued.append((k, i, j, Q, _label_boundaries(Q, cuff_edges)))
    return dec


def pants_constant(mesh: SurfaceMesh, dec: PantsDecomposition | None = None, **kw) -> tuple[float, list]:
    """D' as the largest discrete extremal length of the cuff and arc families.

    Rows are (kind, piece, families, value): loops of each cuff side inside
    its pants, and arcs between each pair of distinct boundary loops inside
    every pants and every pair of pants glued along a common cuff.  Cuffs
    not on a pants contribute zero by convention.
    """
    dec = dec or pants_decomposition(mesh)
    names = dec.names
    rows = []
    for i, (P, lab) in enumerate(zip(dec.pants, dec.pants_cuffs)):
        on = {k for k, _ in lab}
        for k in range(len(dec.cuffs)):
            if k not in on:
                rows.append(("loop", f"P{i + 1}", names[k], 0.0))
        for n, (k, verts) in enumerate(lab):
            cls = LoopClass(P, dec.cuffs[k], anchor=verts)
            res = extremal_solve(P, [(cls, 1.0)], **kw)
            rows.append(("loop", f"P{i + 1}", f"{names[k]}#{n}", res.estimate.value))
    pieces = [(f"P{i + 1}", P, lab) for i, (P, lab) in enumerate(zip(dec.pants, dec.pants_cuffs))]
    pieces += [(f"P{i + 1}{j + 1}^{names[k]}", Q, lab) for k, i, j, Q, lab in dec.glued]
    for tag, Q, lab in pieces:
        for (a, (ka, va)), (b, (kb, vb)) in itertools.combinations(enumerate(lab), 2):
            cls = ArcClass(Q, va, vb, tag=f"{names[ka]}#{a}-{names[kb]}#{b}")
            res = extremal_solve(Q, [(cls, 1.0)], **kw)
            rows.append(("arc", tag, cls.tag, res.estimate.value))
    return max(r[3] for r in rows), rows


def diameter_bound(g: int, d_prime: float) -> tuple[float, float, float]:
    """(30 (g-1) sqrt(D'), pants part (2g-2) 9 sqrt(D'), annuli part (3g-3) 4 sqrt(D'))."""
    if g < 2 or d_prime < 0:
        raise ValueError("need g >= 2 and D' >= 0")
    r = math.sqrt(d_prime)
    return 30 * (g - 1) * r, (2 * g - 2) * 9 * r, (3 * g - 3) * 4 * r


# --- the singular example ----------------------------------------------------------------------

def singular_density(z):
    r = np.abs(z)
    return 1.0 / (r * np.log(1.0 / r))


def singular_example(eps_list=None) -> dict:
    """Area, boundary length and radial lengths of 1 / (|z| log(1/|z|)) on |z| < 1/e.

    All integrals are taken in u = log(1/r), where the area element
    rho^2 r dr dtheta becomes du dtheta / u^2 and the radial element
    rho dr becomes du / u.
    """
    if eps_list is None:
        eps_list = [math.exp(-math.exp(k)) for k in range(1, 5)]
    area_u, err = quad(lambda u: 1.0 / u ** 2, 1.0, math.inf, epsabs=1e-14, epsrel=1e-13)
    area = 2 * math.pi * area_u
    r0 = math.exp(-1.0)
    boundary, _ = quad(lambda t: float(singular_density(r0)) * r0, 0.0, 2 * math.pi)
    rows = []
    for eps in eps_list:
        U = math.log(1.0 / eps)
        # split at powers of e so the quadrature sees a smooth integrand on each piece
        knots = [1.0] + [math.e ** k for k in range(1, int(math.log(U)) + 1) if math.e ** k < U] + [U]
        L = sum(quad(lambda u: 1.0 / u, a, b, epsabs=0, epsrel=1e-12)[0] for a, b in zip(knots[:-1], knots[1:]))
        ll = math.log(U)
        rows.append({"eps": eps, "radial_length": L, "loglog": ll, "ratio": L / ll if ll > 0 else math.nan})
    stated = 2 * math.pi * math.e
    return {"area": area, "area_error": abs(area - 2 * math.pi), "boundary_length": boundary,
            "boundary_stated": stated, "boundary_discrepancy": abs(boundary - stated) > 1e-9 * stated,
            "radial": rows}
