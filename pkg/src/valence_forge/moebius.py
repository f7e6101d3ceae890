"""Möbius transformations and generalised circles."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .sphere import INFINITY, ExtComplex, as_ext


@dataclass(frozen=True)
class MoebiusMap:
    """z -> (a z + b) / (c z + d)."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        for name in "abcd":
            object.__setattr__(self, name, complex(getattr(self, name)))
        scale = max(abs(self.a), abs(self.b), abs(self.c), abs(self.d))
        if scale == 0.0 or abs(self.det) <= 1e-12 * scale * scale:
            raise ValueError(f"degenerate Moebius map (ad - bc = {self.det!r})")

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    @property
    def pole(self) -> ExtComplex:
        """The point sent to infinity."""
        if self.c == 0:
            return INFINITY
        return -self.d / self.c

    def __call__(self, z) -> ExtComplex:
        return apply(self, z)

    def __matmul__(self, other: "MoebiusMap") -> "MoebiusMap":
        return compose(self, other)

    def derivative(self, z):
        """Derivative (ad - bc) / (cz + d)^2 at finite z (arrays allowed)."""
        return self.det / (self.c * z + self.d) ** 2

    def apply_array(self, z: np.ndarray) -> np.ndarray:
        """Action on finite complex arrays; the pole maps to complex(inf, 0)."""
        z = np.asarray(z, dtype=complex)
        num = self.a * z + self.b
        den = self.c * z + self.d
        with np.errstate(divide="ignore", invalid="ignore"):
            out = num / den
        return np.where(den == 0, complex(np.inf, 0.0), out)


IDENTITY = MoebiusMap(1, 0, 0, 1)

# The central map T(z) = (z + 1/3) / (1 + z/3).
T_MAP = MoebiusMap(1, 1 / 3, 1 / 3, 1)
RECIPROCAL = MoebiusMap(0, 1, 1, 0)


def apply(m: MoebiusMap, z) -> ExtComplex:
    z = as_ext(z)
    if z is INFINITY:
        return INFINITY if m.c == 0 else m.a / m.c
    den = m.c * z + m.d
    if den == 0:
        return INFINITY
    return (m.a * z + m.b) / den


def inverse(m: MoebiusMap) -> MoebiusMap:
    return MoebiusMap(m.d, -m.b, -m.c, m.a)


def compose(m1: MoebiusMap, m2: MoebiusMap) -> MoebiusMap:
    """m1 o m2."""
    return MoebiusMap(
        m1.a * m2.a + m1.b * m2.c,
        m1.a * m2.b + m1.b * m2.d,
        m1.c * m2.a + m1.d * m2.c,
        m1.c * m2.b + m1.d * m2.d,
    )


def cell_map(k: int, alpha_k: float) -> MoebiusMap:
    """L_k(z) = (2/3)(e^{-i alpha_k} z - k), sending B(k e^{i alpha_k}, 3/2) onto B(0, 1)."""
    if k < 5:
        raise ValueError("cells are indexed from k = 5")
    rot = cmath.exp(-1j * alpha_k)
    return MoebiusMap(2 / 3 * rot, -2 / 3 * k, 0, 1)


def cell_composite(k: int, alpha_k: float) -> MoebiusMap:
    """T_k = T o L_k."""
    return compose(T_MAP, cell_map(k, alpha_k))


def line_image_abscissa(k: int, j: int) -> float:
    """Abscissa of L_j({Re(z e^{-i alpha_j}) = k + 1/2}), a vertical line."""
    if j < 5 or k < 5:
        raise ValueError("cell indices start at 5")
    return 2.0 / 3.0 * (k - j) + 1.0 / 3.0


def t_boundary_argument(x):
    """alpha(x) = Arg T(x + i sqrt(1 - x^2)) for x in [-1, 1]."""
    x = np.asarray(x, dtype=float)
    w = x + 1j * np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    return np.angle(T_MAP.apply_array(w))


@dataclass(frozen=True)
class GeneralizedCircle:
    """A circle (center, radius) or a line {z : Re(conj(normal) z) = offset}."""

    center: complex | None = None
    radius: float | None = None
    normal: complex | None = None
    offset: float | None = None

    def __post_init__(self):
        if self.is_line:
            if self.center is not None or self.radius is not None:
                raise ValueError("a generalised circle is either a circle or a line")
            n = complex(self.normal)
            if abs(abs(n) - 1.0) > 1e-12:
                raise ValueError("line normal must have modulus 1")
            object.__setattr__(self, "normal", n)
            object.__setattr__(self, "offset", float(self.offset))
        else:
            if self.center is None or self.radius is None or not self.radius > 0:
                raise ValueError("circle needs a center and a positive radius")
            object.__setattr__(self, "center", complex(self.center))
            object.__setattr__(self, "radius", float(self.radius))

    @property
    def is_line(self) -> bool:
        return self.normal is not None

    @classmethod
    def circle(cls, center, radius) -> "GeneralizedCircle":
        return cls(center=complex(center), radius=float(radius))

    @classmethod
    def line(cls, normal, offset) -> "GeneralizedCircle":
        n = complex(normal)
        return cls(normal=n / abs(n), offset=float(offset) / abs(n))

    def points(self, count: int = 3) -> list[complex]:
        """``count`` distinct finite points on the curve."""
        if self.is_line:
            base = self.normal * self.offset
            tangent = 1j * self.normal
            return [base + tangent * (i - (count - 1) / 2) for i in range(count)]
        return [
            self.center + self.radius * cmath.exp(2j * math.pi * (i + 0.125) / count)
            for i in range(count)
        ]

    def distance(self, z) -> float:
        """Euclidean distance from finite z to the curve."""
        z = complex(z)
        if self.is_line:
            return abs((self.normal.conjugate() * z).real - self.offset)
        return abs(abs(z - self.center) - self.radius)

    def contains_point(self, z, tol: float = 1e-10) -> bool:
        z = as_ext(z)
        if z is INFINITY:
            return self.is_line
        return self.distance(z) <= tol * max(1.0, abs(z))


def circle_through(z1: complex, z2: complex, z3: complex, tol: float = 1e-10) -> GeneralizedCircle:
    """Generalised circle through three distinct finite points."""
    z1, z2, z3 = complex(z1), complex(z2), complex(z3)
    d1, d2 = z2 - z1, z3 - z1
    cross = (d1.conjugate() * d2).imag
    scale = max(abs(d1), abs(d2), 1e-300)
    if abs(cross) <= tol * scale * scale:
        direction = d1 if abs(d1) >= abs(d2) else d2
        normal = 1j * direction / abs(direction)
        return GeneralizedCircle.line(normal, (normal.conjugate() * z1).real)
    # circumcenter relative to z1
    c = -1j * (abs(d1) ** 2 * d2 - abs(d2) ** 2 * d1) / (2 * cross)
    return GeneralizedCircle.circle(z1 + c, abs(c))


def image_of_circle(m: MoebiusMap, c: GeneralizedCircle, tol: float = 1e-10) -> GeneralizedCircle:
    """Image of a generalised circle, reconstructed from three image points.

    The image is a line exactly when the pole of ``m`` lies on ``c``.
    """
    pole = m.pole
    through_pole = c.contains_point(pole, tol)
    pts = c.points(3)
    if through_pole and pole is not INFINITY:
        # keep the sample points away from the pole
        pts = [p for p in c.points(7) if abs(p - pole) > 1e-3 * max(1.0, abs(p))][:3]
    images = [apply(m, p) for p in pts]
    if through_pole:
        finite = [w for w in images if w is not INFINITY]
        d = finite[1] - finite[0]
        normal = 1j * d / abs(d)
        return GeneralizedCircle.line(normal, (normal.conjugate() * finite[0]).real)
    if any(w is INFINITY for w in images):
        raise ArithmeticError("sample point hit the pole of the map")
    out = circle_through(*images, tol=0.0)
    if out.is_line:  # numerically collinear images of a genuine circle
        raise ArithmeticError("ill-conditioned circle image")
    return out
