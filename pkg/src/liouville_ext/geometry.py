"""Poincare disk primitives.

Points of the disk are Python/numpy complex numbers.  Isometries are stored
in native SU(1,1) form ``[[a, b], [conj(b), conj(a)]]`` with determinant one,
acting by ``z -> (a z + b) / (conj(b) z + conj(a))``.  The hyperboloid model
(Minkowski form ``-x0 y0 + x1 y1 + x2 y2``) is used where geodesics are easier
to handle as linear objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
LOG_TRACE_SWITCH = 1e8


class GeometryError(ValueError):
    pass


class IllConditionedMapError(GeometryError):
    pass


class NotHyperbolicError(GeometryError):
    pass


@dataclass(frozen=True)
class UnitTangent:
    """A unit tangent vector: base point in the disk and direction angle."""

    base: complex
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "base", complex(self.base))
        object.__setattr__(self, "angle", float(self.angle) % TWO_PI)

    def reversed(self) -> "UnitTangent":
        return UnitTangent(self.base, self.angle + math.pi)


class MobiusMap:
    """Orientation preserving isometry of the disk (element of SU(1,1))."""

    __slots__ = ("matrix",)

    def __init__(self, matrix, normalize: bool = True):
        m = np.array(matrix, dtype=complex).reshape(2, 2)
        if normalize:
            det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
            if abs(det) == 0.0:
                raise GeometryError("singular matrix")
            m = m / np.sqrt(det)
        m.setflags(write=False)
        self.matrix = m

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(np.eye(2, dtype=complex), normalize=False)

    @classmethod
    def from_ab(cls, a: complex, b: complex) -> "MobiusMap":
        return cls([[a, b], [np.conj(b), np.conj(a)]])

    @classmethod
    def rotation(cls, theta: float) -> "MobiusMap":
        """Rotation by ``theta`` about the origin."""
        h = np.exp(0.5j * theta)
        return cls([[h, 0.0], [0.0, np.conj(h)]], normalize=False)

    @classmethod
    def translation(cls, distance: float, direction: float = 0.0) -> "MobiusMap":
        """Hyperbolic translation by ``distance`` along the diameter at angle ``direction``."""
        ch, sh = math.cosh(distance / 2), math.sinh(distance / 2)
        t = cls([[ch, sh], [sh, ch]], normalize=False)
        return cls.rotation(direction) @ t @ cls.rotation(-direction)

    @classmethod
    def frame(cls, v: UnitTangent) -> "MobiusMap":
        """The isometry sending (0, direction +x) to ``v``."""
        z = v.base
        s = 1.0 / math.sqrt(1.0 - abs(z) ** 2)
        to_z = cls([[s, s * z], [s * np.conj(z), s]], normalize=False)
        return to_z @ cls.rotation(v.angle)

    @property
    def a(self) -> complex:
        return complex(self.matrix[0, 0])

    @property
    def b(self) -> complex:
        return complex(self.matrix[0, 1])

    def __matmul__(self, other: "MobiusMap") -> "MobiusMap":
        return MobiusMap(self.matrix @ other.matrix)

    def inverse(self) -> "MobiusMap":
        m = self.matrix
        return MobiusMap([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]], normalize=False)

    def det(self) -> complex:
        m = self.matrix
        return complex(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])

    def trace(self) -> float:
        return float(np.real(self.matrix[0, 0] + self.matrix[1, 1]))

    def __call__(self, z):
        m = self.matrix
        return (m[0, 0] * z + m[0, 1]) / (m[1, 0] * z + m[1, 1])

    def derivative(self, z):
        m = self.matrix
        return 1.0 / (m[1, 0] * z + m[1, 1]) ** 2

    def apply_tangent(self, v: UnitTangent) -> UnitTangent:
        z = v.base
        return UnitTangent(mobius_apply(self, z), v.angle + float(np.angle(self.derivative(z))))

    def fixed_points(self) -> tuple[complex, complex]:
        """(repelling, attracting) fixed points on the circle of a hyperbolic map."""
        return _attracting_point(self.inverse().matrix), _attracting_point(self.matrix)

    def allclose(self, other: "MobiusMap", tol: float = 1e-9) -> bool:
        d1 = np.max(np.abs(self.matrix - other.matrix))
        d2 = np.max(np.abs(self.matrix + other.matrix))
        return min(d1, d2) <= tol * max(1.0, float(np.max(np.abs(self.matrix))))

    def __repr__(self):
        return f"MobiusMap(a={self.a:.6g}, b={self.b:.6g})"


def _attracting_point(m: np.ndarray) -> complex:
    # dominant eigenvector (x, y) of m gives the attracting fixed point x / y
    w, vecs = np.linalg.eig(m)
    k = int(np.argmax(np.abs(w)))
    x, y = vecs[:, k]
    p = x / y
    return complex(p / abs(p))


def mobius_apply(m: MobiusMap, z: complex) -> complex:
    """Apply ``m`` to a disk point, refusing results that leave the open disk."""
    if not abs(z) < 1.0:
        raise GeometryError(f"point {z} not in the open unit disk")
    w = complex(m(z))
    if not abs(w) < 1.0 - 1e-15:
        raise IllConditionedMapError(f"image {w} of {z} is numerically on the unit circle")
    return w


def hyp_distance(z, w):
    """Hyperbolic distance in the disk (curvature -1)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    num = 2.0 * np.abs(z - w) ** 2
    den = (1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2)
    return np.arccosh(1.0 + num / den)


def hyperbolic_density(z):
    """Density of the hyperbolic metric with respect to Euclidean |dz|."""
    return 2.0 / (1.0 - np.abs(np.asarray(z)) ** 2)


def translation_length_from_trace(tr: float, log_abs_trace: float | None = None) -> float:
    """Translation length ``2 arccosh(|tr|/2)``; pass ``log_abs_trace`` for huge traces."""
    if log_abs_trace is not None and log_abs_trace > math.log(LOG_TRACE_SWITCH):
        return 2.0 * log_abs_trace
    t = abs(tr)
    if t <= 2.0:
        raise NotHyperbolicError(f"|trace| = {t} <= 2: element is not hyperbolic")
    if t > LOG_TRACE_SWITCH:
        return 2.0 * (math.log(t) + math.log(0.5 + math.sqrt(0.25 - 1.0 / t**2)))
    return 2.0 * math.acosh(t / 2.0)


def translation_length(m: MobiusMap) -> float:
    return translation_length_from_trace(m.trace())


# --- hyperboloid model -----------------------------------------------------

def minkowski(x, y):
    x = np.asarray(x)
    y = np.asarray(y)
    return -x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1] + x[..., 2] * y[..., 2]


def to_hyperboloid(z):
    z = np.asarray(z, dtype=complex)
    d = 1.0 - np.abs(z) ** 2
    return np.stack([(1.0 + np.abs(z) ** 2) / d, 2.0 * z.real / d, 2.0 * z.imag / d], axis=-1)


def from_hyperboloid(p):
    p = np.asarray(p, dtype=float)
    return (p[..., 1] + 1j * p[..., 2]) / (1.0 + p[..., 0])


def tangent_to_hyperboloid(v: UnitTangent) -> tuple[np.ndarray, np.ndarray]:
    """Hyperboloid point and unit tangent vector corresponding to ``v``."""
    z = v.base
    x, y = z.real, z.imag
    c, s = math.cos(v.angle), math.sin(v.angle)
    d = 1.0 - (x * x + y * y)
    k = (x * c + y * s) / d
    p = to_hyperboloid(z)
    u = np.array([2.0 * k, c + 2.0 * x * k, s + 2.0 * y * k])
    return p, u


def tangent_from_hyperboloid(p, u) -> UnitTangent:
    z = complex(from_hyperboloid(p))
    x, y = z.real, z.imag
    angle = math.atan2(u[2] - y * u[0], u[1] - x * u[0])
    return UnitTangent(z, angle)


def renormalize(p, u):
    """Project (p, u) back onto the unit tangent bundle of the hyperboloid."""
    p = np.asarray(p, dtype=float)
    p = p / math.sqrt(-minkowski(p, p))
    u = np.asarray(u, dtype=float)
    u = u + minkowski(u, p) * p
    u = u / math.sqrt(minkowski(u, u))
    return p, u


def geodesic_point(p, u, t):
    """Point at time ``t`` along the unit speed geodesic through (p, u); broadcasts in t."""
    t = np.asarray(t, dtype=float)[..., None]
    return np.cosh(t) * p + np.sinh(t) * u


def segment_between(z, w):
    """(p, u, length) of the geodesic segment from disk point z to w."""
    p = to_hyperboloid(z)
    q = to_hyperboloid(w)
    c = -minkowski(p, q)
    length = float(np.arccosh(max(c, 1.0)))
    if length == 0.0:
        return p, np.array([0.0, 1.0, 0.0]), 0.0
    u = (q - c * p) / math.sinh(length)
    return p, u, length
