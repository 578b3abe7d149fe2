"""Closed hyperbolic surfaces from the regular 4g-gon, and words in their groups.

Generators are numbered 1..2g in the order a1, b1, a2, b2, ...; a word is a
tuple of nonzero ints, ``-k`` standing for the inverse of generator ``k``.
The side pairing for side ``s`` is the group element carrying the polygon to
its neighbour across ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import (
    GeometryError,
    MobiusMap,
    NotHyperbolicError,
    to_hyperboloid,
    translation_length_from_trace,
)

Word = tuple[int, ...]

MAX_REDUCTION_STEPS = 10**6
FORMAT_HEADER = "# liouville-ext surface v1"


class SurfaceError(GeometryError):
    pass


class ReductionError(SurfaceError):
    pass


class TrivialClassError(SurfaceError):
    pass


class GeometryCorruptError(SurfaceError):
    pass


# --- words -------------------------------------------------------------------

def free_reduce(word) -> Word:
    out: list[int] = []
    for x in word:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(int(x))
    return tuple(out)


def cyclic_reduce(word) -> Word:
    w = list(free_reduce(word))
    i, j = 0, len(w) - 1
    while i < j and w[i] == -w[j]:
        i += 1
        j -= 1
    return tuple(w[i:j + 1])


def invert(word) -> Word:
    return tuple(-x for x in reversed(word))


def cyclic_rotations(word):
    for k in range(len(word)):
        yield tuple(word[k:]) + tuple(word[:k])


def same_cyclic_word(u, v) -> bool:
    u, v = cyclic_reduce(u), cyclic_reduce(v)
    if len(u) != len(v):
        return False
    if not u:
        return True
    return any(r == v for r in cyclic_rotations(u))


def letter_name(x: int) -> str:
    k = abs(x) - 1
    name = ("a", "b")[k % 2] + str(k // 2 + 1)
    return name if x > 0 else name.upper()


def format_word(word) -> str:
    return " ".join(letter_name(x) for x in word)


def parse_word(text: str) -> Word:
    out = []
    for tok in text.replace(",", " ").split():
        kind = tok[0]
        idx = int(tok[1:])
        base = 2 * (idx - 1) + (1 if kind.lower() == "a" else 2)
        if kind.lower() not in "ab" or idx < 1:
            raise ValueError(f"bad letter {tok!r}")
        out.append(base if kind.islower() else -base)
    return tuple(out)


# --- the surface -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SurfacePresentation:
    genus: int
    generators: tuple[MobiusMap, ...]
    polygon: np.ndarray                      # 4g vertices, vertex s between sides s and s+1
    pairing_table: tuple[tuple[int, int, int], ...]   # (side, partner side, letter)
    side_angles: np.ndarray = field(repr=False)
    inradius: float = 0.0
    circumradius: float = 0.0

    def __post_init__(self):
        d = self.inradius
        normals = np.array([[math.sinh(d), math.cosh(d) * math.cos(t), math.cosh(d) * math.sin(t)]
                            for t in self.side_angles])
        object.__setattr__(self, "side_normals", normals)
        object.__setattr__(self, "_side_letter", {s: x for s, _, x in self.pairing_table})
        object.__setattr__(self, "_partner", {s: p for s, p, _ in self.pairing_table})
        object.__setattr__(self, "_inverses", tuple(g.inverse() for g in self.generators))
        centres = np.exp(1j * self.side_angles) / math.tanh(d)  # orthogonal circle centres
        object.__setattr__(self, "_circle_centres", centres)

    @property
    def n_sides(self) -> int:
        return 4 * self.genus

    @property
    def euler_characteristic(self) -> int:
        return 2 - 2 * self.genus

    @property
    def area(self) -> float:
        return 2.0 * math.pi * abs(self.euler_characteristic)

    @property
    def polygon_diameter(self) -> float:
        return 2.0 * self.circumradius

    def letter(self, x: int) -> MobiusMap:
        return self.generators[x - 1] if x > 0 else self._inverses[-x - 1]

    def side_letter(self, side: int) -> int:
        """Letter whose element carries the polygon across ``side``."""
        return self._side_letter[side]

    def partner(self, side: int) -> int:
        return self._partner[side]

    def side_map(self, side: int) -> MobiusMap:
        return self.letter(self.side_letter(side))

    def side_values(self, z) -> np.ndarray:
        """Minkowski pairing of z with each side normal; all <= 0 inside the polygon."""
        return to_hyperboloid(z) @ (self.side_normals * np.array([-1.0, 1.0, 1.0])).T

    def contains(self, z, tol: float = 1e-12) -> bool:
        return bool(np.all(self.side_values(z) <= tol))

    def side_point(self, side: int, t):
        """Point on ``side`` at signed hyperbolic arclength ``t`` from its midpoint (ccw positive)."""
        th = self.side_angles[side]
        m = MobiusMap.rotation(th) @ MobiusMap.translation(self.inradius)
        # the side is the image of the geodesic through 0 perpendicular to the real axis
        return m(1j * np.tanh(np.asarray(t) / 2.0))

    @property
    def side_half_length(self) -> float:
        n = self.n_sides
        return math.acosh(math.cos(math.pi / n) / math.sin(math.pi / n)) if n else 0.0

    def evaluate(self, word) -> MobiusMap:
        m = MobiusMap.identity()
        for x in word:
            m = m @ self.letter(x)
        return m

    def log_trace(self, word) -> tuple[float, float]:
        """(trace, log|trace|) of a word, accumulated with rescaling so long words do not overflow."""
        m = np.eye(2, dtype=complex)
        log_scale = 0.0
        for x in word:
            m = m @ self.letter(x).matrix
            s = float(np.max(np.abs(m)))
            if s > 1e50:
                m /= s
                log_scale += math.log(s)
        tr = float(np.real(m[0, 0] + m[1, 1]))
        if tr == 0.0:
            return 0.0, -math.inf
        return (tr if log_scale == 0.0 else math.copysign(math.inf, tr)), log_scale + math.log(abs(tr))


def build_surface(genus: int) -> SurfacePresentation:
    """Regular 4g-gon with interior angle pi/(2g) and standard side pairings."""
    if genus < 2:
        raise SurfaceError(f"genus {genus} unsupported (need >= 2)")
    n = 4 * genus
    alpha = 2.0 * math.pi / n
    circum = math.acosh(1.0 / (math.tan(math.pi / n) * math.tan(alpha / 2.0)))
    inrad = math.acosh(math.cos(alpha / 2.0) / math.sin(math.pi / n))
    side_angles = np.array([2.0 * math.pi * s / n for s in range(n)])
    r = math.tanh(circum / 2.0)
    polygon = r * np.exp(1j * (side_angles + math.pi / n))

    def pairing(src: int, dst: int) -> MobiusMap:
        # carries side src onto side dst, and the polygon across dst
        return (MobiusMap.rotation(side_angles[dst]) @ MobiusMap.translation(2.0 * inrad)
                @ MobiusMap.rotation(math.pi - side_angles[src]))

    # blocks are visited 0, g-1, ..., 1 around the vertex; relabel so the
    # relator reads [a1,b1][a2,b2]...[ag,bg]
    gens: list[MobiusMap] = []
    table: list[tuple[int, int, int]] = []
    for j in range(genus):
        blk = 0 if j == 0 else genus - j
        s0 = 4 * blk
        a, b = 2 * j + 1, 2 * j + 2
        gens += [pairing(s0 + 1, s0 + 3), pairing(s0 + 2, s0)]
        table += [(s0 + 3, s0 + 1, a), (s0 + 1, s0 + 3, -a), (s0, s0 + 2, b), (s0 + 2, s0, -b)]
    table.sort()
    return SurfacePresentation(genus, tuple(gens), polygon, tuple(table), side_angles, inrad, circum)


def relator(genus: int) -> Word:
    w: list[int] = []
    for j in range(genus):
        a, b = 2 * j + 1, 2 * j + 2
        w += [a, b, -a, -b]
    return tuple(w)


def polygon_angle_sum(s: SurfacePresentation) -> float:
    """Sum of interior angles of the fundamental polygon, from its vertices."""
    total = 0.0
    n = s.n_sides
    for k in range(n):
        v = s.polygon[k]
        # unit tangents at v towards the neighbouring vertices
        to_v = MobiusMap.from_ab(1.0, -v)   # sends v to 0 (up to normalization)
        p = to_v(s.polygon[(k + 1) % n])
        q = to_v(s.polygon[(k - 1) % n])
        ang = abs(np.angle(p / q))
        total += ang
    return float(total)


# --- point normalization -------------------------------------------------------

def normalize_point(s: SurfacePresentation, z: complex, tol: float = 1e-13) -> tuple[complex, Word]:
    """Reduce z into the fundamental polygon.

    Returns ``(w, word)`` with ``evaluate(word)(w) == z``.  Each step applies the
    inverse side pairing of a violated side, choosing the one that brings the
    point closest to the origin (lowest side index on ties).
    """
    word: list[int] = []
    z = complex(z)
    if not abs(z) < 1.0:
        raise GeometryError(f"point {z} not in the open unit disk")
    for _ in range(MAX_REDUCTION_STEPS):
        vals = s.side_values(z)
        bad = np.nonzero(vals > tol)[0]
        if bad.size == 0:
            return z, tuple(word)
        best = None
        for side in bad:
            w = complex(s.side_map(int(side)).inverse()(z))
            key = (abs(w), int(side))
            if best is None or key < best[0]:
                best = (key, w, int(side))
        _, z, side = best
        word.append(s.side_letter(side))
    raise ReductionError("point reduction did not terminate")


def lookahead_normalize(s: SurfacePresentation, z: complex, tol: float = 1e-13) -> tuple[complex, Word]:
    """Reduction with exhaustive one-step lookahead (slow reference)."""
    word: list[int] = []
    z = complex(z)
    for _ in range(MAX_REDUCTION_STEPS):
        if np.all(s.side_values(z) <= tol):
            return z, tuple(word)
        best = None
        for side in range(s.n_sides):
            w = complex(s.side_map(side).inverse()(z))
            look = min(abs(complex(s.side_map(t).inverse()(w))) for t in range(s.n_sides))
            key = (min(abs(w), look), abs(w), side)
            if best is None or key < best[0]:
                best = (key, w, side)
        _, z, side = best
        word.append(s.side_letter(side))
    raise ReductionError("point reduction did not terminate")


# --- lengths -------------------------------------------------------------------

def geodesic_length(s: SurfacePresentation, word) -> float:
    """Length of the closed geodesic in the free homotopy class of ``word``."""
    w = cyclic_reduce(word)
    if not w:
        raise TrivialClassError("trivial word has no closed geodesic")
    tr, log_tr = s.log_trace(w)
    if math.isfinite(tr):
        if abs(abs(tr) - 2.0) < 1e-8:
            raise TrivialClassError(f"word {format_word(w)} evaluates to +-identity or a parabolic")
        if abs(tr) < 2.0:
            raise GeometryCorruptError(f"word {format_word(w)} evaluates to an elliptic element")
        return translation_length_from_trace(tr)
    return translation_length_from_trace(math.inf, log_abs_trace=log_tr)


def is_hyperbolic(s: SurfacePresentation, word) -> bool:
    try:
        geodesic_length(s, word)
    except (NotHyperbolicError, SurfaceError):
        return False
    return True


# --- text interchange ------------------------------------------------------------

def export_surface(s: SurfacePresentation, path) -> None:
    lines = [FORMAT_HEADER, f"genus {s.genus}",
             f"radii {float(s.inradius)!r} {float(s.circumradius)!r}"]
    for k, g in enumerate(s.generators, start=1):
        m = g.matrix
        lines.append("generator {} {!r} {!r} {!r} {!r}".format(
            letter_name(k), *(float(c) for c in (m[0, 0].real, m[0, 0].imag, m[0, 1].real, m[0, 1].imag))))
    for k, (v, th) in enumerate(zip(s.polygon, s.side_angles)):
        lines.append(f"vertex {k} {float(v.real)!r} {float(v.imag)!r} {float(th)!r}")
    for side, partner, letter in s.pairing_table:
        lines.append(f"pairing {side} {partner} {letter_name(letter)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_surface(path) -> SurfacePresentation:
    genus = None
    gens: dict[int, MobiusMap] = {}
    verts, angles, table = [], [], []
    inrad = circ = 0.0
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, *rest = line.split()
        if key == "genus":
            genus = int(rest[0])
        elif key == "radii":
            inrad, circ = float(rest[0]), float(rest[1])
        elif key == "generator":
            (x,) = parse_word(rest[0])
            ar, ai, br, bi = map(float, rest[1:])
            a, b = complex(ar, ai), complex(br, bi)
            gens[x] = MobiusMap([[a, b], [b.conjugate(), a.conjugate()]], normalize=False)
        elif key == "vertex":
            verts.append(complex(float(rest[1]), float(rest[2])))
            angles.append(float(rest[3]))
        elif key == "pairing":
            (x,) = parse_word(rest[2])
            table.append((int(rest[0]), int(rest[1]), x))
        else:
            raise SurfaceError(f"unknown record {key!r}")
    if genus is None or len(gens) != 2 * genus:
        raise SurfaceError("incomplete surface file")
    return SurfacePresentation(genus, tuple(gens[k] for k in range(1, 2 * genus + 1)),
                               np.array(verts), tuple(sorted(table)), np.array(angles), inrad, circ)
