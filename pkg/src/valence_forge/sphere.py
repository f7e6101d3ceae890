"""Chordal geometry on the Riemann sphere.

Points of the extended plane are plain Python ``complex`` values plus the
singleton :data:`INFINITY`.  Vectorised helpers accept numpy arrays in which
the point at infinity is encoded as ``complex(inf, 0)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


class _Infinity:
    """The point at infinity of the extended complex plane."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITY"

    def __reduce__(self):
        return (_Infinity, ())

    def __hash__(self) -> int:
        return hash("valence_forge.INFINITY")

    def __eq__(self, other) -> bool:
        return other is self


INFINITY = _Infinity()

ExtComplex = Union[complex, _Infinity]


def is_infinite(z) -> bool:
    if z is INFINITY:
        return True
    z = complex(z)
    return math.isinf(z.real) or math.isinf(z.imag)


def as_ext(z) -> ExtComplex:
    """Coerce numbers (or the string ``"inf"``) to an ExtComplex value."""
    if z is INFINITY or (isinstance(z, str) and z.strip().lower() in ("inf", "infinity", "oo")):
        return INFINITY
    z = complex(z)
    if math.isnan(z.real) or math.isnan(z.imag):
        raise ValueError("NaN is not a point of the extended plane")
    if math.isinf(z.real) or math.isinf(z.imag):
        return INFINITY
    return z


def chordal_distance(z, a) -> float:
    """Chordal distance k(z, a) on the extended plane, a value in [0, 1]."""
    z, a = as_ext(z), as_ext(a)
    if z is INFINITY and a is INFINITY:
        return 0.0
    if a is INFINITY:
        z, a = a, z
    if z is INFINITY:
        return 1.0 / math.hypot(1.0, abs(a))
    return abs(z - a) / (math.hypot(1.0, abs(z)) * math.hypot(1.0, abs(a)))


def chordal_distance_array(z: np.ndarray, a) -> np.ndarray:
    """Vectorised chordal distance from each entry of ``z`` to ``a``.

    Entries of ``z`` with an infinite component stand for the point at infinity.
    """
    z = np.asarray(z, dtype=complex)
    zinf = np.isinf(z.real) | np.isinf(z.imag)
    zf = np.where(zinf, 0.0, z)
    hz = np.hypot(1.0, np.abs(zf))
    a = as_ext(a)
    if a is INFINITY:
        return np.where(zinf, 0.0, 1.0 / hz)
    ha = math.hypot(1.0, abs(a))
    return np.where(zinf, 1.0 / ha, np.abs(zf - a) / (hz * ha))


def chordal_between_logs(lu: np.ndarray, lv: np.ndarray, clip: float = 300.0) -> np.ndarray:
    """Chordal distance between ``exp(lu)`` and ``exp(lv)``, given as complex logs.

    Infinite real parts encode 0 and infinity.  Magnitudes beyond ``e**clip``
    are indistinguishable from the poles of the sphere in double precision.
    """
    lu = np.asarray(lu, dtype=complex)
    lv = np.asarray(lv, dtype=complex)
    # k(1/u, 1/v) = k(u, v): pick the side where the product of moduli is <= 1
    flip = (np.clip(lu.real, -clip, clip) + np.clip(lv.real, -clip, clip)) > 0
    su = np.where(flip, -1.0, 1.0)
    ru = np.clip(su * lu.real, -clip, clip)
    rv = np.clip(su * lv.real, -clip, clip)
    iu = np.where(np.isfinite(lu.imag), su * lu.imag, 0.0)
    iv = np.where(np.isfinite(lv.imag), su * lv.imag, 0.0)
    u = np.exp(ru + 1j * iu)
    v = np.exp(rv + 1j * iv)
    return np.abs(u - v) / (np.hypot(1.0, np.abs(u)) * np.hypot(1.0, np.abs(v)))


def chordal_disk_area(radius: float) -> float:
    """Normalised spherical area of a chordal disk D(a, radius)."""
    if not (0.0 < radius <= 1.0):
        raise ValueError(f"chordal radius must lie in (0, 1], got {radius!r}")
    return radius * radius


def euclidean_radius_of_chordal_disk(radius: float) -> float:
    """Radius R with B(0, R) = D(0, radius)."""
    if not (0.0 < radius < 1.0):
        raise ValueError("radius must lie in (0, 1)")
    return math.sqrt(radius * radius / (1.0 - radius * radius))


@dataclass(frozen=True)
class ChordalDisk:
    center: ExtComplex
    radius: float

    def __post_init__(self):
        if not (0.0 < self.radius <= 1.0):
            raise ValueError(f"chordal radius must lie in (0, 1], got {self.radius!r}")
        object.__setattr__(self, "center", as_ext(self.center))

    def __contains__(self, z) -> bool:
        return chordal_distance(z, self.center) < self.radius

    @property
    def area(self) -> float:
        return chordal_disk_area(self.radius)


def omega_disks(eps: float, half: bool = False) -> tuple[ChordalDisk, ChordalDisk, ChordalDisk]:
    """The disks around 0, infinity and 1 of chordal radius sqrt(eps) (or half of it)."""
    rad = math.sqrt(eps) / (2.0 if half else 1.0)
    return ChordalDisk(0j, rad), ChordalDisk(INFINITY, rad), ChordalDisk(1 + 0j, rad)


def _check_disjoint(eps: float) -> None:
    if not (0.0 < eps < 1.0):
        raise ValueError(f"epsilon must lie in (0, 1), got {eps!r}")
    rad = math.sqrt(eps)
    # pairwise chordal distances of the centres: k(0,inf)=1, k(0,1)=k(1,inf)=1/sqrt(2)
    if 2 * rad > 1 / math.sqrt(2):
        raise ValueError(
            f"epsilon={eps} too large: disks of chordal radius {rad:.4g} around 0, 1, inf overlap"
        )


@dataclass(frozen=True)
class RegionX:
    """Sphere minus the three chordal disks of area ``epsilon`` at 0, infinity and 1."""

    epsilon: float

    def __post_init__(self):
        _check_disjoint(self.epsilon)

    @property
    def measure(self) -> float:
        return 1.0 - 3.0 * self.epsilon

    @property
    def excluded(self) -> tuple[ChordalDisk, ChordalDisk, ChordalDisk]:
        return omega_disks(self.epsilon)

    def __contains__(self, a) -> bool:
        return in_region_x(a, self.epsilon)


def in_region_x(a, eps: float) -> bool:
    _check_disjoint(eps)
    rad = math.sqrt(eps)
    return all(chordal_distance(a, c) >= rad for c in (0j, INFINITY, 1 + 0j))


def in_region_x_array(a: np.ndarray, eps: float) -> np.ndarray:
    _check_disjoint(eps)
    rad = math.sqrt(eps)
    a = np.asarray(a, dtype=complex)
    return (
        (chordal_distance_array(a, 0j) >= rad)
        & (chordal_distance_array(a, INFINITY) >= rad)
        & (chordal_distance_array(a, 1 + 0j) >= rad)
    )


def uniform_sphere_array(count: int, seed: int) -> np.ndarray:
    """``count`` points uniform for the normalised spherical measure.

    Returns a complex array; the north pole (probability zero) maps to
    ``complex(inf, 0)``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    v = rng.random(count)
    cos_t = 1.0 - 2.0 * u
    phi = 2.0 * np.pi * v
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
    # stereographic projection from the north pole (0, 0, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = sin_t / (1.0 - cos_t)
    out = rho * np.exp(1j * phi)
    return np.where(cos_t >= 1.0, complex(np.inf, 0.0), out)


def uniform_sphere_sample(count: int, seed: int) -> list[ExtComplex]:
    return [as_ext(z) for z in uniform_sphere_array(count, seed)]


def sphere_grid(size: int) -> list[ExtComplex]:
    """Deterministic near-uniform probe set on the sphere, closed under w -> 1/w.

    Fibonacci lattice on the upper hemisphere (as seen from the sphere's
    equator |w| = 1) together with the reciprocals of those points.
    """
    if size < 1:
        return []
    half = max(1, size // 2)
    golden = math.pi * (3.0 - math.sqrt(5.0))
    pts: list[ExtComplex] = []
    for i in range(half):
        # heights in (0, 1) on the southern hemisphere -> |w| < 1
        cos_t = -(i + 0.5) / half
        phi = i * golden + 0.3
        sin_t = math.sqrt(1.0 - cos_t * cos_t)
        rho = sin_t / (1.0 - cos_t)
        w = complex(rho * math.cos(phi), rho * math.sin(phi))
        pts.append(w)
        pts.append(1.0 / w)
    return pts
