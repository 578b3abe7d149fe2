"""Reference computations independent of the package solvers."""

import clarabel
import numpy as np
from scipy import sparse


def simple_paths(m, sources, targets):
    """Every simple path on positive length edges from a source to a target, as edge lists."""
    adj = {v: [] for v in range(m.n_vertices)}
    for e, (a, b) in enumerate(m.edge_ends):
        if m.edge_length[e] > 0:
            adj[a].append((e, b))
            adj[b].append((e, a))
    targets = set(int(t) for t in targets)
    out = []

    def walk(v, seen, edges):
        if v in targets and edges:
            out.append(list(edges))
            return
        for e, w in adj[v]:
            if w not in seen:
                seen.add(w)
                edges.append(e)
                walk(w, seen, edges)
                edges.pop()
                seen.discard(w)

    for s in sources:
        if int(s) not in targets:
            walk(int(s), {int(s)}, [])
    return out


def brute_force_ext(m, paths):
    """min sum w x^2 subject to every listed path having length >= 1, by a direct conic solve."""
    keep = np.flatnonzero(m.edge_weight > 0)
    col = {e: i for i, e in enumerate(keep)}
    n = len(keep)
    rows, cols, vals = [], [], []
    for r, p in enumerate(paths):
        for e in p:
            rows.append(r)
            cols.append(col[e])
            vals.append(-m.edge_length[e])
    A = sparse.vstack([sparse.csc_matrix((vals, (rows, cols)), shape=(len(paths), n)), -sparse.eye(n)]).tocsc()
    b = np.concatenate([-np.ones(len(paths)), np.zeros(n)])
    P = sparse.diags(2 * m.edge_weight[keep]).tocsc()
    st = clarabel.DefaultSettings()
    st.verbose = False
    st.tol_gap_abs = st.tol_gap_rel = st.tol_feas = 1e-12
    sol = clarabel.DefaultSolver(P, np.zeros(n), A, b, [clarabel.NonnegativeConeT(len(b))], st).solve()
    x = np.array(sol.x)
    return 1.0 / float(m.edge_weight[keep] @ x ** 2)
