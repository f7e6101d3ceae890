"""The average valence A(r, f) by quadrature and by averaging exact counts.

Quadrature: f#^2 is negligible except in thin bands |log|T_k|| <~ 12/N_k
around the circles bounding the cells, where it oscillates N_k times around
the circle.  Each band is integrated in the coordinates (s, psi) with
T_k(z) = exp(s/N_k + i psi), using adaptive tensor Gauss-Legendre cells
(orders 9 and 15, their difference being the error estimate).  The disk
B(0, r) cuts each band along an arc whose end points are computed exactly
for every s-node.  Where S(0, r) is nearly tangent to a circle |T_k| = const
inside the band the arc width has a square-root singularity in s; there
s = s* +- eta u^2 restores smoothness.  The rest of the disk is bounded on
a grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .construction import Cell, ToppilaFunction
from .moebius import T_MAP, GeneralizedCircle, image_of_circle
from .sphere import INFINITY, as_ext, in_region_x_array, uniform_sphere_array
from .winding import ClearanceExhausted, RefinementLimit, count_in_cell_many, count_in_disk_many

# band half-width in the scaled coordinate s = N_k log|T_k|
BAND = 12.0
S_BREAKS = (-BAND, -5.0, -2.0, 0.0, 2.0, 5.0, BAND)
MAX_ROUNDS = 40
LOW_ORDER = 9
MAX_CELLS = 4_000_000
RECT_CHUNK = 2048
Y_REGIONS = ("full", "X", "X-minus-exceptional")


class RefinementBudgetExceeded(ArithmeticError):
    def __init__(self, value: float, bound: float):
        self.value, self.bound = value, bound
        super().__init__(f"quadrature budget exhausted: partial value {value:.10g} +- {bound:.3g}")


@dataclass(frozen=True)
class AreaResult:
    value: float
    error_estimate: float
    method: str  # "quadrature" or "counting"
    work_units: int  # cells for quadrature, samples for counting
    skipped: int = 0

    def __post_init__(self):
        if self.error_estimate < 0 or self.value < 0:
            raise ValueError("area and its error estimate are non-negative")


@lru_cache(maxsize=None)
def _gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _image_of_disk(cell: Cell, r: float) -> tuple[complex, float, bool]:
    """T_k(B(0, r)) as (center, radius, inside) in the tau plane.

    ``inside`` tells whether the disk maps to the interior of the circle.
    """
    tk = T_MAP @ cell.L
    img = image_of_circle(tk, GeneralizedCircle.circle(0j, r))
    if img.is_line:
        raise ArithmeticError(f"S(0, {r}) passes through the pole of T_{cell.k}")
    inside = abs(complex(tk(0j)) - img.center) < img.radius
    return img.center, img.radius, inside


def _arc_limits(rho: np.ndarray, c: complex, rad: float, inside: bool) -> tuple[np.ndarray, np.ndarray]:
    """psi-interval [lo, lo + width] of the circle |tau| = rho inside T_k(B(0, r))."""
    d = abs(c)
    phi0 = math.atan2(c.imag, c.real)
    if d == 0.0:
        full = (rho <= rad) if inside else (rho >= rad)
        return np.full(rho.shape, -np.pi), np.where(full, 2 * np.pi, 0.0)
    q = (rho * rho + d * d - rad * rad) / (2 * rho * d)
    h = np.arccos(np.clip(q, -1.0, 1.0))
    if inside:
        return phi0 - h, 2 * h
    return phi0 + h, 2 * np.pi - 2 * h


class _Band:
    """Integrand of one cell band in the unit coordinates (s, xi)."""

    def __init__(self, fun: ToppilaFunction, cell: Cell, r: float | None):
        self.fun, self.cell = fun, cell
        self.disk = _image_of_disk(cell, r) if r is not None else None

    def limits(self, s: np.ndarray):
        rho = np.exp(s / self.cell.n)
        if self.disk is None:
            return np.full(s.shape, -np.pi), np.full(s.shape, 2 * np.pi)
        return _arc_limits(rho, *self.disk)

    def values(self, s: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """(1/pi) f#^2 |dz/dtau|^2 |tau|^2 (1/N) * width, on broadcast s, xi."""
        lo, width = self.limits(s)
        psi = lo + width * xi
        tau = np.exp(s / self.cell.n + 1j * psi)
        w = (tau - 1.0 / 3.0) / (1.0 - tau / 3.0)
        z = self.cell.from_local(w)
        jac = (4.0 / 3.0) / np.abs(1.0 - tau / 3.0) ** 2 * np.abs(tau)
        sharp = self.fun.spherical_derivative(z.ravel(), check=False).reshape(z.shape)
        return (sharp * jac) ** 2 * width / (self.cell.n * math.pi)

    def tangent_levels(self) -> list[float]:
        """Values of s inside the band where |tau| = e^{s/N} touches the image circle."""
        if self.disk is None:
            return []
        c, rad, _ = self.disk
        d = abs(c)
        out = []
        for rho in (d + rad, abs(d - rad)):
            if rho > 0:
                lv = self.cell.n * math.log(rho)
                if abs(lv) < BAND:
                    out.append(lv)
        return sorted(out)

    def max_width(self) -> float:
        s = np.linspace(-BAND, BAND, 257)
        return float(np.max(self.limits(s)[1]))


@dataclass
class _Rects:
    """Batch of rectangles in (u, xi); s = base + scale * u**power on each."""

    u0: np.ndarray
    u1: np.ndarray
    x0: np.ndarray
    x1: np.ndarray
    base: np.ndarray
    scale: np.ndarray
    power: np.ndarray

    def s_of(self, u: np.ndarray) -> np.ndarray:
        return self.base + self.scale * u ** self.power

    def s_extent(self) -> np.ndarray:
        return np.abs(self.s_of(self.u1) - self.s_of(self.u0))

    def take(self, mask: np.ndarray) -> "_Rects":
        return _Rects(*(getattr(self, f)[mask] for f in _RECT_FIELDS))

    def split(self, along_u: np.ndarray) -> "_Rects":
        um = 0.5 * (self.u0 + self.u1)
        xm = 0.5 * (self.x0 + self.x1)
        cat = np.concatenate
        return _Rects(
            cat([self.u0, np.where(along_u, um, self.u0)]),
            cat([np.where(along_u, um, self.u1), self.u1]),
            cat([self.x0, np.where(along_u, self.x0, xm)]),
            cat([np.where(along_u, self.x1, xm), self.x1]),
            cat([self.base, self.base]), cat([self.scale, self.scale]), cat([self.power, self.power]),
        )


_RECT_FIELDS = ("u0", "u1", "x0", "x1", "base", "scale", "power")

# half-width (in s) of the substituted zone around a tangency level
TANGENT_ZONE = 1.0


def _s_segments(levels: list[float]) -> list[tuple[float, float, int, float, float]]:
    """(base, scale, power, u0, u1) pieces covering [-BAND, BAND]."""
    zones = []
    for i, lv in enumerate(levels):
        eta = min(TANGENT_ZONE, BAND - lv, lv + BAND)
        if i > 0:
            eta = min(eta, 0.5 * (lv - levels[i - 1]))
        if i + 1 < len(levels):
            eta = min(eta, 0.5 * (levels[i + 1] - lv))
        zones.append((lv, eta))
    cuts = [b for b in S_BREAKS if not any(abs(b - lv) < eta for lv, eta in zones)]
    cuts += [lv + sgn * eta for lv, eta in zones for sgn in (-1, 1)]
    cuts = sorted(set(cuts))
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if any(lv - eta <= a and b <= lv + eta for lv, eta in zones):
            continue
        out.append((0.0, 1.0, 1, a, b))
    for lv, eta in zones:
        out.append((lv, -eta, 2, 0.0, 1.0))
        out.append((lv, eta, 2, 0.0, 1.0))
    return out


def _rect_rules(band: _Band, rects: _Rects) -> tuple[np.ndarray, np.ndarray]:
    """Gauss 15 and low-order tensor sums for a batch of rectangles."""
    n = rects.u0.size
    hi = np.empty(n)
    lo = np.empty(n)
    # chunked so the node arrays stay small (cell 8 alone has ~5e4 rectangles)
    for i in range(0, n, RECT_CHUNK):
        sl = slice(i, i + RECT_CHUNK)
        a0, a1, b0, b1 = rects.u0[sl], rects.u1[sl], rects.x0[sl], rects.x1[sl]
        base, scale, power = (v[sl][:, None, None] for v in (rects.base, rects.scale, rects.power))
        for order, out in ((15, hi), (LOW_ORDER, lo)):
            g, w = _gauss(order)
            U = a0[:, None, None] + (a1 - a0)[:, None, None] * g[None, :, None]
            X = b0[:, None, None] + (b1 - b0)[:, None, None] * g[None, None, :]
            S = base + scale * U ** power
            jac = np.abs(scale) * power * U ** (power - 1)
            S, X = np.broadcast_arrays(S, X)
            v = band.values(S, X) * jac
            out[sl] = np.einsum("rij,i,j->r", v, w, w) * (a1 - a0) * (b1 - b0)
    return hi, lo


def band_integral(fun: ToppilaFunction, k: int, r: float | None, tol: float,
                  max_cells: int = MAX_CELLS) -> tuple[float, float, int]:
    """Area contribution of the band around the circle of cell k, cut by B(0, r).

    Returns (value, error estimate, number of cells evaluated).  The local
    tolerance of a rectangle is tol times its share of the (s, xi) domain.
    """
    cell = fun.cell(k)
    band = _Band(fun, cell, r)
    width = band.max_width()
    if width <= 0.0:
        return 0.0, 0.0, 0
    panels = max(1, int(math.ceil(cell.n * width / (2 * math.pi))))
    segs = _s_segments(band.tangent_levels())
    xb = np.linspace(0.0, 1.0, panels + 1)
    cols = [np.repeat(np.array(col, dtype=float), panels) for col in zip(*segs)]
    base, scale, power, u0, u1 = cols
    rects = _Rects(u0, u1, np.tile(xb[:-1], len(segs)), np.tile(xb[1:], len(segs)), base, scale, power)
    total_area = 2.0 * BAND
    value = 0.0
    error = 0.0
    used = 0
    for _ in range(MAX_ROUNDS):
        if rects.u0.size == 0:
            break
        used += rects.u0.size
        if used > max_cells:
            raise RefinementBudgetExceeded(value, error + float("inf"))
        q15, qlow = _rect_rules(band, rects)
        err = np.abs(q15 - qlow)
        share = rects.s_extent() * (rects.x1 - rects.x0) / total_area
        ok = err <= tol * share
        value += float(np.sum(q15[ok]))
        error += float(np.sum(err[ok]))
        if np.all(ok):
            rects = rects.take(~ok)
            break
        rects = rects.take(~ok)
        # split along the longer side measured in natural units (s ~ 1, one period in xi ~ 1/panels)
        rects = rects.split(rects.s_extent() > (rects.x1 - rects.x0) * panels)
    if rects.u0.size:
        raise RefinementBudgetExceeded(value, error)
    return value, error, used


def _remainder_bound(fun: ToppilaFunction, r: float, grid: int = 400) -> float:
    """Bound on the integral over B(0, r) outside every band.

    Sample f#^2 on a polar grid, drop the band points, and multiply the
    largest value by the (normalised) area of the disk.
    """
    t = (np.arange(grid) + 0.5) / grid * r
    th = (np.arange(grid) + 0.5) / grid * 2 * np.pi
    z = (t[:, None] * np.exp(1j * th[None, :])).ravel()
    x = fun.exponents(z)
    in_band = np.any(np.abs(x.real) < BAND, axis=0)
    keep = z[~in_band]
    if keep.size == 0:
        return 0.0
    peak = float(np.max(fun.spherical_derivative(keep, check=False) ** 2))
    # the bound keeps a factor 10 for values between grid points
    return 10.0 * peak * r * r


def band_touches_disk(cell: Cell, r: float) -> bool:
    return r > abs(cell.center) - 1.7


def area_quadrature(fun: ToppilaFunction, r: float, tol: float | None = None) -> AreaResult:
    """A(r, f) = (1/pi) int_{|z| < r} f#(z)^2 dA by banded adaptive Gauss 9/15 cells."""
    tol = fun.params.quad_tol if tol is None else tol
    if not (0 < r <= fun.eval_radius):
        raise ValueError(f"r={r} outside (0, {fun.eval_radius}]")
    if not tol > 0:
        raise ValueError("tol must be positive")
    cells = [c for c in fun.cells if band_touches_disk(c, r)]
    value = error = 0.0
    work = 0
    for c in cells:
        v, e, n = band_integral(fun, c.k, r, tol / max(1, len(cells)))
        value += v
        error += e
        work += n
    error += _remainder_bound(fun, r)
    return AreaResult(max(value, 0.0), error, "quadrature", work)


# --- counting oracle -------------------------------------------------------------

def _sample_targets(samples: int, seed: int) -> list:
    arr = uniform_sphere_array(samples, seed)
    return [INFINITY if np.isinf(a.real) else complex(a) for a in arr]


def _mean_and_error(values: list[int]) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 0.0, 0.0
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return float(np.mean(v)), 3.0 * sd / math.sqrt(v.size)


def _counts_with_skips(count_fn, targets: list) -> tuple[list[int], int]:
    """Counts for all targets; a batch failure falls back to one-by-one so only bad targets are skipped."""
    try:
        return [c.count for c in count_fn(targets)], 0
    except (ClearanceExhausted, RefinementLimit):
        pass
    out, skipped = [], 0
    for a in targets:
        try:
            out.append(count_fn([a])[0].count)
        except (ClearanceExhausted, RefinementLimit):
            skipped += 1
    return out, skipped


def area_counting_oracle(fun: ToppilaFunction, r: float, samples: int = 400, seed: int = 0) -> AreaResult:
    """Mean of n(r, a) over uniform spherical a; error = 3 sd / sqrt(samples)."""
    if samples < 100:
        raise ValueError("samples must be >= 100")
    targets = _sample_targets(samples, seed)
    counts, skipped = _counts_with_skips(lambda ts: count_in_disk_many(fun, r, ts), targets)
    if skipped > 0.01 * samples:
        raise ArithmeticError(f"{skipped} of {samples} counting samples failed (limit 1%)")
    mean, err = _mean_and_error(counts)
    return AreaResult(mean, err, "counting", len(counts), skipped)


def cell_area(fun: ToppilaFunction, k: int, r: float, Y: str = "X", samples: int = 400, seed: int = 0,
              exceptional=None) -> AreaResult:
    """A_k^Y(r, f): m(Y) times the mean of n_k(r, a, f) over samples conditioned on a in Y.

    ``exceptional`` is a predicate on a (for 'X-minus-exceptional'); its
    measure is estimated from the same samples.
    """
    if Y not in Y_REGIONS:
        raise ValueError(f"Y must be one of {Y_REGIONS}")
    if samples < 1:
        raise ValueError("samples must be positive")
    arr = uniform_sphere_array(samples, seed)
    if Y == "full":
        keep = np.ones(arr.shape, dtype=bool)
    else:
        keep = in_region_x_array(np.where(np.isinf(arr.real), complex(np.inf, 0), arr), fun.params.epsilon)
        if Y == "X-minus-exceptional" and exceptional is not None:
            keep &= ~np.array([bool(exceptional(as_ext(a))) for a in arr])
    targets = [INFINITY if np.isinf(a.real) else complex(a) for a in arr[keep]]
    if Y == "full":
        measure = 1.0
    elif Y == "X":
        measure = 1.0 - 3.0 * fun.params.epsilon
    else:
        # X is known exactly; the exceptional part is estimated from the sample
        x_mask = in_region_x_array(np.where(np.isinf(arr.real), complex(np.inf, 0), arr), fun.params.epsilon)
        frac = keep.sum() / max(1, x_mask.sum())
        measure = (1.0 - 3.0 * fun.params.epsilon) * frac
    if not targets:
        return AreaResult(0.0, 0.0, "counting", 0)
    counts, skipped = _counts_with_skips(lambda ts: count_in_cell_many(fun, k, r, ts), targets)
    if skipped > 0.01 * len(targets):
        raise ArithmeticError(f"{skipped} of {len(targets)} counting samples failed (limit 1%)")
    mean, err = _mean_and_error(counts)
    return AreaResult(measure * mean, measure * err, "counting", len(counts), skipped)


def area_rows(r: float, results: list[AreaResult]) -> list[dict]:
    return [dict(r=r, method=a.method, value=a.value, error=a.error_estimate, work_units=a.work_units)
            for a in results]
