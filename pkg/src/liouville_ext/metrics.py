"""Conformal densities on X, their areas and lengths, and ergodic averages.

A density is stored through its ratio ``f = rho / rho_X`` to the hyperbolic
density.  Because ``rho_X`` is invariant under the side pairings, any
group-invariant ``f`` gives a pairing compatible density, which is how the
bump family below is built: each bump is summed over its orbit under the
surface group.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .flow import Arcs, FlowTrajectory, WeightedMultiCurve
from .geometry import hyperbolic_density, to_hyperboloid
from .surface import SurfacePresentation, geodesic_length

_J = np.array([-1.0, 1.0, 1.0])
QUAD_TOL = 1e-9          # target relative agreement between two quadrature levels
PRECISION_LIMIT = 1e-2   # beyond this the estimate is refused


class PrecisionError(ArithmeticError):
    pass


# --- densities -----------------------------------------------------------------------

class ConformalDensity:
    """Base class; subclasses implement ``ratio`` on hyperboloid points."""

    scale: float = 1.0

    def ratio_h(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def ratio(self, z) -> np.ndarray:
        return self.ratio_h(to_hyperboloid(z))

    def __call__(self, z) -> np.ndarray:
        return self.ratio(z) * hyperbolic_density(z)

    def scaled(self, c: float) -> "ConformalDensity":
        raise NotImplementedError

    def descriptor(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class HyperbolicDensity(ConformalDensity):
    """c * rho_X."""

    scale: float = 1.0

    def ratio_h(self, x):
        x = np.asarray(x)
        return np.full(x.shape[:-1], self.scale)

    def scaled(self, c):
        return HyperbolicDensity(self.scale * c)

    def descriptor(self):
        return f"density hyperbolic\nscale {float(self.scale)!r}\n"


def bump_profile(d, radius):
    """Smooth bump in the hyperbolic distance: exp(1 - 1/(1 - (d/r)^2)), zero beyond r."""
    d = np.asarray(d, dtype=float)
    q = np.clip(d / radius, 0.0, 1.0) ** 2
    with np.errstate(divide="ignore", over="ignore"):
        out = np.exp(1.0 - 1.0 / (1.0 - q))
    return np.where(q < 1.0, out, 0.0)


@functools.lru_cache(maxsize=64)
def _tile_maps(s: SurfacePresentation, reach: float) -> np.ndarray:
    """Lorentz matrices of group elements whose tile meets the ball of radius ``reach``.

    Tiles are gamma(P) for gamma in the group; the set meeting a ball is
    connected, so a breadth first search through adjacent tiles finds it.
    """
    from .flow import lorentz_matrix

    steps = [lorentz_matrix(s.side_map(k)) for k in range(s.n_sides)]
    origin = np.array([1.0, 0.0, 0.0])
    limit = math.cosh(reach + 2.0 * s.circumradius)
    seen = {(1.0, 0.0, 0.0)}
    found = [np.eye(3)]
    frontier = [np.eye(3)]
    while frontier:
        nxt = []
        for g in frontier:
            for L in steps:
                h = g @ L
                c = h @ origin
                if c[0] > limit:
                    continue
                key = tuple(np.round(c, 6))
                if key in seen:
                    continue
                seen.add(key)
                found.append(h)
                nxt.append(h)
        frontier = nxt
    return np.array(found)


@dataclass(frozen=True, eq=False)
class BumpDensity(ConformalDensity):
    """rho_X * scale * max(0, 1 + sum_i alpha_i sum_gamma psi(d(z, gamma c_i)))."""

    surface: SurfacePresentation
    centres: tuple[complex, ...]
    alphas: tuple[float, ...]
    radius: float = 0.8
    scale: float = 1.0
    orbit: np.ndarray = field(init=False, repr=False)
    orbit_alpha: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.centres) != len(self.alphas):
            raise ValueError("centres and alphas differ in length")
        if not 0.0 < self.radius <= 2.0:
            raise ValueError("bump radius must lie in (0, 2]")
        object.__setattr__(self, "centres", tuple(complex(c) for c in self.centres))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        tiles = _tile_maps(self.surface, float(self.radius))
        limit = math.cosh(self.surface.circumradius + self.radius)
        pts, al = [], []
        for c, a in zip(self.centres, self.alphas):
            img = tiles @ to_hyperboloid(c)
            keep = img[:, 0] <= limit
            pts.append(img[keep])
            al.append(np.full(int(keep.sum()), a))
        object.__setattr__(self, "orbit", np.concatenate(pts) if pts else np.zeros((0, 3)))
        object.__setattr__(self, "orbit_alpha", np.concatenate(al) if al else np.zeros(0))

    def ratio_h(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        x = x.reshape(-1, 3)
        total = np.ones(len(x))
        cut = math.cosh(self.radius)
        for chunk in range(0, len(x), 20000):
            xs = x[chunk:chunk + 20000]
            ch = -(xs * _J) @ self.orbit.T
            i, j = np.nonzero(ch < cut)
            if len(i):
                d = np.arccosh(np.maximum(ch[i, j], 1.0))
                np.add.at(total[chunk:chunk + 20000], i, self.orbit_alpha[j] * bump_profile(d, self.radius))
        return (self.scale * np.maximum(total, 0.0)).reshape(shape)

    def scaled(self, c):
        return BumpDensity(self.surface, self.centres, self.alphas, self.radius, self.scale * c)

    def descriptor(self):
        lines = ["density bump", f"scale {float(self.scale)!r}", f"radius {float(self.radius)!r}"]
        lines += [f"bump {float(c.real)!r} {float(c.imag)!r} {float(a)!r}" for c, a in zip(self.centres, self.alphas)]
        return "\n".join(lines) + "\n"


def load_density(text: str, s: SurfacePresentation | None = None) -> ConformalDensity:
    """Inverse of ``descriptor``; bump densities need the surface."""
    kind, fields, bumps = None, {}, []
    for line in text.splitlines():
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        if tok[0] == "density":
            kind = tok[1]
        elif tok[0] == "bump":
            bumps.append((complex(float(tok[1]), float(tok[2])), float(tok[3])))
        elif tok[0] in ("scale", "radius"):
            fields[tok[0]] = float(tok[1])
        else:
            raise ValueError(f"unknown density field {tok[0]!r}")
    if kind == "hyperbolic":
        return HyperbolicDensity(fields.get("scale", 1.0))
    if kind == "bump":
        if s is None:
            raise ValueError("a bump density needs its surface")
        return BumpDensity(s, tuple(b[0] for b in bumps), tuple(b[1] for b in bumps),
                           fields.get("radius", 0.8), fields.get("scale", 1.0))
    raise ValueError(f"unknown density type {kind!r}")


def random_bump_density(s: SurfacePresentation, seed, n_bumps: int = 3,
                        radius: float = 0.8, alpha_range=(-0.6, 1.0)) -> BumpDensity:
    from .flow import sample_tangents

    rng = np.random.default_rng(seed)
    centres = tuple(v.base for v in sample_tangents(s, n_bumps, rng))
    alphas = tuple(rng.uniform(*alpha_range, size=n_bumps))
    return BumpDensity(s, centres, alphas, radius)


def pairing_residual(s: SurfacePresentation, rho: ConformalDensity, n: int = 32) -> float:
    """max relative |rho(m z)|m'(z)| - rho(z)| over sampled side points."""
    worst = 0.0
    t = np.linspace(-0.95, 0.95, n) * s.side_half_length
    for side in range(s.n_sides):
        m = s.side_map(side).inverse()   # carries `side` onto its partner
        z = s.side_point(side, t)
        w = m(z)
        lhs = rho(w) * np.abs(m.derivative(z))
        rhs = rho(z)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300))))
    return worst


# --- quadrature over the polygon -------------------------------------------------------

@functools.lru_cache(maxsize=32)
def polygon_rule(s: SurfacePresentation, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (disk points) and Euclidean area weights for the polygon.

    One polar wedge per side; Gauss-Legendre in the angle (two panels per
    wedge) and in the radius rescaled to the side, so every node is inside.
    """
    x, wx = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    wx = 0.5 * wx
    c = 1.0 / math.tanh(s.inradius)
    half = math.pi / s.n_sides
    nodes, weights = [], []
    for k in range(s.n_sides):
        th = s.side_angles[k]
        for lo in (-half, 0.0):
            phi = lo + half * x
            wphi = half * wx
            cd = np.cos(phi)
            rside = c * cd - np.sqrt(c * c * cd * cd - 1.0)
            r = rside[:, None] * x[None, :]
            w = (wphi * rside)[:, None] * wx[None, :] * r
            nodes.append((r * np.exp(1j * (th + phi))[:, None]).ravel())
            weights.append(w.ravel())
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float

    def __float__(self):
        return self.value


def integrate(s: SurfacePresentation, fn, n0: int = 24, n_max: int = 192) -> QuadResult:
    """Integral of fn(z) dxdy over the polygon, doubling the rule until two levels agree."""
    prev = None
    n = n0
    while True:
        z, w = polygon_rule(s, n)
        val = float(np.sum(w * fn(z)))
        if prev is not None:
            err = abs(val - prev)
            if err <= QUAD_TOL * max(abs(val), 1e-300) or 2 * n > n_max:
                if err > PRECISION_LIMIT * max(abs(val), 1e-300):
                    raise PrecisionError(f"quadrature not converged: {prev} vs {val}")
                return QuadResult(val, err)
        prev = val
        n *= 2


def area(s: SurfacePresentation, rho: ConformalDensity) -> QuadResult:
    """Area(rho) = integral of rho^2 dxdy over X."""
    return integrate(s, lambda z: rho(z) ** 2)


def space_average(s: SurfacePresentation, rho: ConformalDensity) -> QuadResult:
    """(1/Area(X)) integral of rho rho_X dxdy, the Liouville mean of rho/rho_X."""
    q = integrate(s, lambda z: rho(z) * hyperbolic_density(z))
    return QuadResult(q.value / s.area, q.error / s.area)


def cauchy_schwarz_check(s: SurfacePresentation, rho: ConformalDensity) -> tuple[float, float]:
    """(integral rho rho_X, sqrt(Area(rho) Area(X))), both by the same quadrature."""
    lhs = integrate(s, lambda z: rho(z) * hyperbolic_density(z)).value
    a_rho = area(s, rho).value
    a_x = integrate(s, lambda z: hyperbolic_density(z) ** 2).value
    return lhs, math.sqrt(a_rho * a_x)


# --- lengths along arcs ------------------------------------------------------------------

PIECE = 0.25


@functools.lru_cache(maxsize=8)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _arc_integral(rho: ConformalDensity, arcs: Arcs, n: int, piece: float) -> float:
    if len(arcs) == 0:
        return 0.0
    if isinstance(rho, HyperbolicDensity):
        return rho.scale * float(np.sum(arcs.length))
    x, w = _gauss(n)
    pieces = np.maximum(1, np.ceil(arcs.length / piece).astype(int))
    idx = np.repeat(np.arange(len(arcs)), pieces)
    start = np.concatenate([np.arange(k) for k in pieces])
    h = arcs.length[idx] / pieces[idx]
    t = (start[:, None] + x[None, :]) * h[:, None]
    p = arcs.p[idx][:, None, :]
    u = arcs.u[idx][:, None, :]
    pts = np.cosh(t)[..., None] * p + np.sinh(t)[..., None] * u
    f = rho.ratio_h(pts)
    return float(np.sum(f * w[None, :] * h[:, None]))


def length_along(rho: ConformalDensity, path) -> QuadResult:
    """L_rho of a path given as arcs (or anything with an ``arcs`` attribute).

    Along a unit speed hyperbolic geodesic rho |dz| = (rho / rho_X) dt.
    """
    arcs = path if isinstance(path, Arcs) else path.arcs
    fine = _arc_integral(rho, arcs, 6, PIECE)
    coarse = _arc_integral(rho, arcs, 6, 2 * PIECE)
    err = abs(fine - coarse)
    if err > PRECISION_LIMIT * max(abs(fine), 1e-300):
        raise PrecisionError(f"arc quadrature not converged: {coarse} vs {fine}")
    return QuadResult(fine, err)


def curve_rho_length(s: SurfacePresentation, rho: ConformalDensity, c: WeightedMultiCurve) -> float:
    """Weighted rho-length of the hyperbolic geodesic representatives (an upper proxy for l_rho)."""
    from .flow import closed_geodesic

    total = 0.0
    for word, weight in c.components:
        if isinstance(rho, HyperbolicDensity):
            total += weight * rho.scale * geodesic_length(s, word)
        else:
            total += weight * length_along(rho, closed_geodesic(s, word)).value
    return total


def birkhoff_average(rho: ConformalDensity, traj: FlowTrajectory) -> float:
    """(1/T) integral of (rho/rho_X)(phi_t v) dt along the trajectory."""
    if not traj.time > 0:
        raise ValueError("need a positive flow time")
    return length_along(rho, traj).value / traj.time


def hopf_ratio(s: SurfacePresentation, rho: ConformalDensity, traj: FlowTrajectory,
               g: WeightedMultiCurve) -> float:
    """L_rho(G_T) / sqrt(Area(rho)) for the flow path closed by its segment back to the start.

    ``g`` is the approximant G_T; its weight multiplies the path length.
    """
    (_, weight), = g.components
    path = Arcs.concat([traj.arcs, traj.closing_arc()])
    return weight * length_along(rho, path).value / math.sqrt(area(s, rho).value)


def hopf_bound(s: SurfacePresentation) -> float:
    """(pi/2) sqrt(Area(X))."""
    return 0.5 * math.pi * math.sqrt(s.area)
