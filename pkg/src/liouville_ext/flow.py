"""Geodesic flow on X, closed curves g_T(v) and the normalized approximants G_T(v).

The flow is event driven: a trajectory is a chain of exact geodesic arcs inside
the fundamental polygon, each ending on a side, after which the state is
carried back into the polygon by the inverse side pairing.  Arcs are stored in
hyperboloid form ``(p, u, length)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .geometry import (
    MobiusMap,
    UnitTangent,
    from_hyperboloid,
    renormalize,
    segment_between,
    tangent_from_hyperboloid,
    tangent_to_hyperboloid,
    to_hyperboloid,
)
from .surface import (
    SurfaceError,
    SurfacePresentation,
    TrivialClassError,
    Word,
    cyclic_reduce,
    format_word,
    geodesic_length,
    normalize_point,
    parse_word,
)

VERTEX_TOL = 1e-12
MAX_RETRIES = 5
PERTURBATION = 1e-9
_J = np.array([-1.0, 1.0, 1.0])


class FlowError(SurfaceError):
    pass


class VertexHitError(FlowError):
    pass


class TooShortError(FlowError):
    pass


# --- data ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Arcs:
    """Geodesic arcs inside the polygon: start points, unit tangents, lengths."""

    p: np.ndarray
    u: np.ndarray
    length: np.ndarray
    exit_side: np.ndarray

    @classmethod
    def empty(cls) -> "Arcs":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0), np.zeros(0, dtype=int))

    @classmethod
    def concat(cls, parts) -> "Arcs":
        parts = [a for a in parts if len(a)]
        if not parts:
            return cls.empty()
        return cls(np.concatenate([a.p for a in parts]), np.concatenate([a.u for a in parts]),
                   np.concatenate([a.length for a in parts]),
                   np.concatenate([a.exit_side for a in parts]))

    def __len__(self):
        return len(self.length)

    @property
    def total_length(self) -> float:
        return float(np.sum(self.length))

    def end_points(self) -> np.ndarray:
        t = self.length[:, None]
        return np.cosh(t) * self.p + np.sinh(t) * self.u


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    start: UnitTangent
    time: float
    arcs: Arcs
    deck_word: Word
    end: UnitTangent

    @property
    def segments(self):
        """(start point, end point, exit side) per arc, in disk coordinates."""
        a = from_hyperboloid(self.arcs.p)
        b = from_hyperboloid(self.arcs.end_points())
        return list(zip(a, b, self.arcs.exit_side.tolist()))

    def closing_arc(self) -> Arcs:
        """Geodesic segment inside the polygon from the end point back to the start."""
        p, u, length = segment_between(self.end.base, self.start.base)
        return Arcs(p[None, :], u[None, :], np.array([length]), np.array([-1]))

    def dump(self) -> str:
        lines = [f"# trajectory T={float(self.time)!r} word={format_word(self.deck_word)}"]
        for a, b, side in self.segments:
            lines.append(f"{float(a.real)!r} {float(a.imag)!r} {float(b.real)!r} {float(b.imag)!r} {side}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class WeightedMultiCurve:
    components: tuple[tuple[Word, float], ...]

    def __post_init__(self):
        comps = []
        for word, weight in self.components:
            w = cyclic_reduce(word)
            if not w:
                raise ValueError("multi-curve components must be nontrivial")
            if not weight > 0:
                raise ValueError(f"weights must be positive, got {weight}")
            comps.append((w, float(weight)))
        object.__setattr__(self, "components", tuple(comps))

    @classmethod
    def single(cls, word, weight: float = 1.0) -> "WeightedMultiCurve":
        return cls(((tuple(word), weight),))

    def scaled(self, c: float) -> "WeightedMultiCurve":
        return WeightedMultiCurve(tuple((w, c * x) for w, x in self.components))

    def to_text(self) -> str:
        return "".join(f"{float(x)!r}: {format_word(w)}\n" for w, x in self.components)

    @classmethod
    def from_text(cls, text: str) -> "WeightedMultiCurve":
        comps = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            weight, letters = line.split(":", 1)
            comps.append((parse_word(letters), float(weight)))
        return cls(tuple(comps))


# --- isometries on the hyperboloid -------------------------------------------------

def lorentz_matrix(m: MobiusMap) -> np.ndarray:
    """Linear action of a disk isometry on the hyperboloid."""
    z0 = complex(m(0.0))
    ang = float(np.angle(m.derivative(0.0)))
    p0, u1 = tangent_to_hyperboloid(UnitTangent(z0, ang))
    _, u2 = tangent_to_hyperboloid(UnitTangent(z0, ang + math.pi / 2))
    return np.column_stack([p0, u1, u2])


class _Kernel:
    """Per-surface side normals and inverse side pairings as Lorentz matrices."""

    def __init__(self, s: SurfacePresentation):
        self.normals = s.side_normals * _J
        self.back = [lorentz_matrix(s.side_map(k).inverse()) for k in range(s.n_sides)]
        self.letters = [s.side_letter(k) for k in range(s.n_sides)]
        self.partner = [s.partner(k) for k in range(s.n_sides)]
        self.vertices = np.asarray(s.polygon)
        self.vertex_density = 2.0 / (1.0 - np.abs(self.vertices) ** 2)

    @staticmethod
    @functools.lru_cache(maxsize=None)
    def of(s: SurfacePresentation) -> "_Kernel":
        return _Kernel(s)


def _next_exit(kern: _Kernel, p, u, entry: int = -1):
    """(time, side) of the first exit through a polygon side, or (inf, -1).

    ``entry`` is the side the point has just come in through; rounding may
    leave it marginally outside that side, which must not trigger a crossing.
    """
    a = kern.normals @ p
    b = kern.normals @ u
    if entry >= 0:
        a[entry] = min(a[entry], 0.0)
    outside = np.nonzero(a > 1e-13)[0]
    if outside.size:
        k = int(outside[np.argmax(a[outside])])
        return 0.0, k
    best_t, best_k = math.inf, -1
    for k in np.nonzero(b > 0.0)[0]:
        r = -a[k] / b[k]
        if r < 1.0:
            t = math.atanh(max(r, 0.0))
            if t < best_t:
                best_t, best_k = t, int(k)
    return best_t, best_k


def _near_vertex(kern: _Kernel, q) -> bool:
    z = complex(from_hyperboloid(q))
    return bool(np.min(np.abs(kern.vertices - z) * kern.vertex_density) < VERTEX_TOL)


def _flow_once(s: SurfacePresentation, v: UnitTangent, T: float):
    kern = _Kernel.of(s)
    p, u = tangent_to_hyperboloid(v)
    ps, us, ls, sides, word = [], [], [], [], []
    remaining = float(T)
    guard = 0
    entry = -1
    while remaining > 0.0:
        guard += 1
        if guard > 100 * (T + 10):
            raise FlowError("too many side crossings")
        t, k = _next_exit(kern, p, u, entry)
        if t >= remaining:
            ps.append(p); us.append(u); ls.append(remaining); sides.append(-1)
            ch, sh = math.cosh(remaining), math.sinh(remaining)
            p, u = ch * p + sh * u, sh * p + ch * u
            remaining = 0.0
            break
        if t > 0.0:
            ps.append(p); us.append(u); ls.append(t); sides.append(k)
            ch, sh = math.cosh(t), math.sinh(t)
            p, u = ch * p + sh * u, sh * p + ch * u
            remaining -= t
        if _near_vertex(kern, p):
            raise VertexHitError("trajectory passes through a polygon vertex")
        L = kern.back[k]
        p, u = renormalize(L @ p, L @ u)
        word.append(kern.letters[k])
        entry = kern.partner[k]
    arcs = Arcs(np.array(ps).reshape(-1, 3), np.array(us).reshape(-1, 3),
                np.array(ls, dtype=float), np.array(sides, dtype=int))
    p, u = renormalize(p, u)
    return arcs, tuple(word), tangent_from_hyperboloid(p, u)


def flow(s: SurfacePresentation, v: UnitTangent, T: float) -> FlowTrajectory:
    """Run the geodesic flow for time T from ``v`` (based in the polygon)."""
    if T < 0:
        raise ValueError("flow time must be nonnegative")
    if not s.contains(v.base, tol=1e-9):
        raise FlowError(f"start point {v.base} is not in the fundamental polygon")
    if T == 0:
        return FlowTrajectory(v, 0.0, Arcs.empty(), (), v)
    last = None
    for attempt in range(MAX_RETRIES + 1):
        w = UnitTangent(v.base, v.angle + attempt * PERTURBATION)
        try:
            arcs, word, end = _flow_once(s, w, T)
        except VertexHitError as exc:
            last = exc
            continue
        return FlowTrajectory(w, float(T), arcs, word, end)
    raise VertexHitError(f"vertex hit persisted after {MAX_RETRIES} perturbations") from last


def close_trajectory(s: SurfacePresentation, traj: FlowTrajectory) -> WeightedMultiCurve:
    """The closed curve g_T(v): trajectory followed by the closing segment in the polygon."""
    w = cyclic_reduce(traj.deck_word)
    if not w:
        raise TooShortError("deck word is trivial; flow time too short to close up")
    try:
        geodesic_length(s, w)
    except (TrivialClassError, SurfaceError) as exc:
        raise TooShortError(f"closed-up class is not hyperbolic: {exc}") from exc
    return WeightedMultiCurve.single(w, 1.0)


def liouville_approximant(s: SurfacePresentation, g: WeightedMultiCurve) -> WeightedMultiCurve:
    """G_T = (i(L_X, L_X) / l_X(g)) g with i(L_X, L_X) = pi Area(X) / 2."""
    if len(g.components) != 1:
        raise ValueError("expected the single-component curve g_T")
    word, weight = g.components[0]
    if weight != 1.0:
        raise ValueError("expected weight one")
    length = geodesic_length(s, word)
    if length <= 0.0:
        raise FlowError("zero-length curve")
    return WeightedMultiCurve.single(word, self_intersection(s) / length)


def self_intersection(s: SurfacePresentation) -> float:
    """i(L_X, L_X) = pi Area(X) / 2."""
    return math.pi * s.area / 2.0


# --- sampling ------------------------------------------------------------------------

def sample_tangents(s: SurfacePresentation, n: int, seed) -> list[UnitTangent]:
    """Liouville-distributed unit tangents: base uniform for hyperbolic area, angle uniform."""
    rng = np.random.default_rng(seed)
    r_max = float(np.max(np.abs(s.polygon)))
    dens_max = (2.0 / (1.0 - r_max**2)) ** 2
    out: list[UnitTangent] = []
    while len(out) < n:
        m = max(64, 10 * (n - len(out)))
        rad = r_max * np.sqrt(rng.random(m))
        z = rad * np.exp(2j * np.pi * rng.random(m))
        keep = rng.random(m) * dens_max < (2.0 / (1.0 - np.abs(z) ** 2)) ** 2
        keep &= np.all(s.side_values(z) <= 0.0, axis=-1)
        angles = 2.0 * np.pi * rng.random(m)
        for zz, aa in zip(z[keep], angles[keep]):
            out.append(UnitTangent(complex(zz), float(aa)))
            if len(out) == n:
                break
    return out


def sample_tangent(s: SurfacePresentation, seed) -> UnitTangent:
    return sample_tangents(s, 1, seed)[0]


# --- closed geodesic representatives -----------------------------------------------------

def _mp_letter(s: SurfacePresentation, x):
    """Generator as an extended precision matrix, determinant one at that precision."""
    m = mpmath.matrix(s.letter(x).matrix.tolist())
    return m / mpmath.sqrt(mpmath.det(m))


def _mp_word(s: SurfacePresentation, word):
    m = mpmath.eye(2)
    for x in word:
        m = m * _mp_letter(s, x)
    return m


def _mp_lorentz(m):
    """Lorentz matrix of a disk isometry, built from the images of the origin frame."""
    a, b = m[0, 0], m[0, 1]
    z = b / mpmath.conj(a)
    x, y = mpmath.re(z), mpmath.im(z)
    d = 1 - (x * x + y * y)
    ang = 2 * mpmath.arg(a)
    cols = [[(1 + x * x + y * y) / d, 2 * x / d, 2 * y / d]]
    for th in (ang, ang + mpmath.pi / 2):
        c, s_ = mpmath.cos(th), mpmath.sin(th)
        k = (x * c + y * s_) / d
        cols.append([2 * k, c + 2 * x * k, s_ + 2 * y * k])
    return mpmath.matrix([[cols[j][i] for j in range(3)] for i in range(3)])


def _mp_apply(m, z):
    return (m[0, 0] * z + m[0, 1]) / (m[1, 0] * z + m[1, 1])


def _mp_fixed_points(m):
    """(repelling, attracting) fixed points of a hyperbolic 2x2 matrix."""
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    root = mpmath.sqrt((a - d) ** 2 + 4 * b * c)
    z1 = (a - d + root) / (2 * c)
    z2 = (a - d - root) / (2 * c)
    # the derivative 1/(cz+d)^2 is small at the attracting point
    if abs(c * z1 + d) > abs(c * z2 + d):
        return z2, z1
    return z1, z2


def _mp_mink(x, y):
    return -x[0] * y[0] + x[1] * y[1] + x[2] * y[2]


def _mp_renormalize(p, u):
    p = [c / mpmath.sqrt(-_mp_mink(p, p)) for c in p]
    pu = _mp_mink(u, p)
    u = [u[i] + pu * p[i] for i in range(3)]
    return p, [c / mpmath.sqrt(_mp_mink(u, u)) for c in u]


def _mp_axis(rep, att):
    """Axis point midway between two ideal points and the unit tangent towards ``att``."""
    nr = [mpmath.mpf(1), mpmath.re(rep) / abs(rep), mpmath.im(rep) / abs(rep)]
    na = [mpmath.mpf(1), mpmath.re(att) / abs(att), mpmath.im(att) / abs(att)]
    scale = mpmath.sqrt(2 * (nr[0] * na[0] - nr[1] * na[1] - nr[2] * na[2]))
    p = [(nr[i] + na[i]) / scale for i in range(3)]
    u = [(na[i] - nr[i]) / scale for i in range(3)]
    return p, u


@dataclass(frozen=True, eq=False)
class ClosedGeodesic:
    word: Word
    length: float
    arcs: Arcs
    conjugators: tuple[Word, ...] = field(repr=False)   # frame word at the start of each arc
    entry_offsets: np.ndarray = field(repr=False, default=None)
    crossing_word: Word = ()   # side crossing letters over one period


def closed_geodesic(s: SurfacePresentation, word) -> ClosedGeodesic:
    """Arcs of the closed geodesic of ``word`` inside the polygon, in order along the axis.

    Following a closed orbit is exponentially unstable, so the axis is traced
    with enough extra bits to absorb a growth of exp(length).
    """
    w = cyclic_reduce(word)
    length = geodesic_length(s, w)
    kern = _Kernel.of(s)
    bits = int((length + 60.0) / math.log(2.0)) + 64
    with mpmath.workprec(bits):
        rep, att = _mp_fixed_points(_mp_word(s, w))
        p, _ = _mp_axis(rep, att)
        z0, h = normalize_point(s, complex((p[1] + 1j * p[2]) / (1 + p[0])))
        hinv = _mp_word(s, tuple(-y for y in reversed(h)))
        p, u = _mp_axis(_mp_apply(hinv, rep), _mp_apply(hinv, att))
        # slide along the new axis to the point nearest z0, which lies in the polygon
        q = [mpmath.mpf(c) for c in to_hyperboloid(z0)]
        r = _mp_mink(q, u) / _mp_mink(q, p)
        ch, sh = 1 / mpmath.sqrt(1 - r * r), r / mpmath.sqrt(1 - r * r)
        p, u = ([ch * p[i] + sh * u[i] for i in range(3)],
                [sh * p[i] + ch * u[i] for i in range(3)])
        normals = [[mpmath.mpf(float(c)) for c in row] for row in kern.normals]
        back = [_mp_lorentz(_mp_letter(s, -x)) for x in kern.letters]
        frame = list(h)
        ps, us, ls, sides, frames, offsets = [], [], [], [], [], []
        travelled = mpmath.mpf(0)
        total = mpmath.mpf(length)
        start = p
        entry = -1
        guard = 0
        while travelled < total - 1e-12:
            guard += 1
            if guard > 100 * (length + 10):
                raise FlowError("axis trace did not close up")
            t, k = _mp_next_exit(normals, p, u, entry)
            t_use = min(t, total - travelled)
            if t_use > 0:
                pf, uf = renormalize(np.array(p, dtype=float), np.array(u, dtype=float))
                ps.append(pf); us.append(uf); ls.append(float(t_use))
                sides.append(k if t <= t_use else -1)
                frames.append(tuple(frame)); offsets.append(float(travelled))
                travelled += t_use
            if t >= t_use and travelled >= total - 1e-12:
                break
            ch, sh = mpmath.cosh(t), mpmath.sinh(t)
            q = [ch * p[i] + sh * u[i] for i in range(3)]
            v = [sh * p[i] + ch * u[i] for i in range(3)]
            L = back[k]
            p = [L[i, 0] * q[0] + L[i, 1] * q[1] + L[i, 2] * q[2] for i in range(3)]
            u = [L[i, 0] * v[0] + L[i, 1] * v[1] + L[i, 2] * v[2] for i in range(3)]
            p, u = _mp_renormalize(p, u)
            frame.append(kern.letters[k])
            entry = kern.partner[k]
        ch, sh = mpmath.cosh(t_use), mpmath.sinh(t_use)
        gap = -_mp_mink(start, [ch * p[i] + sh * u[i] for i in range(3)]) - 1
        if not abs(gap) < 1e-18:
            raise FlowError(f"axis trace missed its starting point (gap {float(gap):.3g})")
    crossings = tuple(frame[len(h):])
    if sides[-1] >= 0:
        crossings += (kern.letters[sides[-1]],)
    arcs = Arcs(np.array(ps).reshape(-1, 3), np.array(us).reshape(-1, 3),
                np.array(ls), np.array(sides, dtype=int))
    return ClosedGeodesic(w, length, arcs, tuple(frames), np.array(offsets), crossings)


def _mp_next_exit(normals, p, u, entry):
    a = [n[0] * p[0] + n[1] * p[1] + n[2] * p[2] for n in normals]
    b = [n[0] * u[0] + n[1] * u[1] + n[2] * u[2] for n in normals]
    if entry >= 0:
        a[entry] = min(a[entry], 0)
    worst = max(range(len(a)), key=lambda k: a[k])
    if a[worst] > 1e-13:
        return mpmath.mpf(0), worst
    best_t, best_k = mpmath.inf, -1
    for k in range(len(a)):
        if b[k] > 0:
            r = -a[k] / b[k]
            if r < 1:
                t = mpmath.atanh(max(r, 0))
                if t < best_t:
                    best_t, best_k = t, k
    return best_t, best_k

