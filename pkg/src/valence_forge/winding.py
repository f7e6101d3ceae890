"""Argument-principle counting of a-points.

Winding numbers are found by tracking arg(f - a) along circular arcs, with
adaptive bisection.  Two things drive the refinement.  First, every factor
S_k whose power T_k^{-N_k} is not negligible must turn by less than one radian
per step, which stops the huge-degree factors aliasing.  Second, the image
must move by less than a quarter turn around a and by less than half of its
chordal clearance from a.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import logspace
from .construction import DomainError, ToppilaFunction
from .sphere import INFINITY, ExtComplex, as_ext, sphere_grid

MAX_DEPTH = 24
JITTER_STEPS = 12
# factors with Re(-N log T) below this are ~e^-40 from 1 and cannot alias the argument
ACTIVE_EXPONENT = -40.0


class ClearanceExhausted(ArithmeticError):
    """The image curve came within winding_tol of the target value."""


class RefinementLimit(ArithmeticError):
    """Bisection depth exhausted before the tracking criteria were met."""


@dataclass(frozen=True)
class Arc:
    """z(s) = center + radius e^{i(theta0 + s (theta1 - theta0))}, s in [0, 1]."""

    center: complex
    radius: float
    theta0: float
    theta1: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("arc radius must be positive")
        if self.theta0 == self.theta1:
            raise ValueError("arc has zero angular extent")
        object.__setattr__(self, "center", complex(self.center))

    def at(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return self.center + self.radius * np.exp(1j * (self.theta0 + s * (self.theta1 - self.theta0)))

    @property
    def start(self) -> complex:
        return self.center + self.radius * cmath.exp(1j * self.theta0)

    @property
    def end(self) -> complex:
        return self.center + self.radius * cmath.exp(1j * self.theta1)

    @property
    def length(self) -> float:
        return self.radius * abs(self.theta1 - self.theta0)

    @property
    def counterclockwise(self) -> bool:
        return self.theta1 > self.theta0


@dataclass(frozen=True)
class Contour:
    pieces: tuple[Arc, ...]
    closed: bool = True

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise ValueError("empty contour")
        object.__setattr__(self, "pieces", pieces)
        links = list(zip(pieces[:-1], pieces[1:]))
        if self.closed:
            links.append((pieces[-1], pieces[0]))
        for p, q in links:
            if abs(p.end - q.start) > 1e-10 * max(1.0, abs(q.start)):
                raise ValueError(f"contour pieces do not join: {p.end} vs {q.start}")

    @classmethod
    def circle(cls, center, radius, clockwise: bool = False) -> "Contour":
        t1 = -2 * math.pi if clockwise else 2 * math.pi
        return cls((Arc(center, radius, 0.0, t1),))

    @property
    def length(self) -> float:
        return sum(p.length for p in self.pieces)


@dataclass(frozen=True)
class WindingResult:
    winding: int
    samples_used: int
    min_chordal_clearance: float
    # log of the clearance; the float above underflows to 0 when f - a is
    # resolved only in the log domain (a = 1 on the flat part of f)
    log_min_clearance: float = 0.0


@dataclass(frozen=True)
class CountResult:
    count: int
    samples: int
    clearance: float
    r: float


def _wrap(d: np.ndarray) -> np.ndarray:
    return (d + np.pi) % (2 * np.pi) - np.pi


class _Track:
    """Samples of one arc with cached log-domain state."""

    def __init__(self, fun: ToppilaFunction, arc: Arc, m0: int):
        self.fun = fun
        self.arc = arc
        self.s = np.linspace(0.0, 1.0, m0 + 1)
        self.level = np.zeros(m0, dtype=np.int64)
        self.x, self.L = fun.log_state(arc.at(self.s))
        self.n = np.array([c.n for c in fun.cells], dtype=float)[:, None]

    def bisect(self, idx: np.ndarray) -> None:
        mid = 0.5 * (self.s[idx] + self.s[idx + 1])
        xm, Lm = self.fun.log_state(self.arc.at(mid))
        lev = self.level.copy()
        lev[idx] += 1
        self.level = np.insert(lev, idx + 1, lev[idx])
        self.s = np.insert(self.s, idx + 1, mid)
        self.x = np.insert(self.x, idx + 1, xm, axis=1)
        self.L = np.insert(self.L, idx + 1, Lm)

    def factor_flags(self, relative: bool = False) -> np.ndarray:
        # change of -N log T between neighbours; arg T moves continuously so wrap it per factor
        logT = -self.x / self.n
        d = logT[:, 1:] - logT[:, :-1]
        d = d.real + 1j * _wrap(d.imag)
        turn = np.abs(self.n * d)
        top = np.maximum(self.x.real[:, 1:], self.x.real[:, :-1])
        active = top > ACTIVE_EXPONENT
        if relative:
            best = np.max(top, axis=0, keepdims=True)
            active |= top > best + ACTIVE_EXPONENT
        return np.any(active & (turn > 1.0), axis=0)


def _lhyp(lr: np.ndarray) -> np.ndarray:
    """log hypot(1, e^lr) for real arrays."""
    return 0.5 * np.logaddexp(0.0, 2.0 * np.clip(lr, -1e6, 1e6))


def _target_state(tr: _Track, a: ExtComplex, log_tol: float):
    g, res = tr.fun.log_minus_from(tr.x, tr.L, a)
    if not np.all(np.isfinite(g.real)):
        raise ClearanceExhausted(f"contour passes through a zero, pole or {a}-point of {tr.fun.label}")
    worst = float(np.min(res))
    if worst < log_tol:
        raise ClearanceExhausted(
            f"image of the contour within exp({worst:.4g}) of {a} (winding_tol = exp({log_tol:.4g}))"
        )
    # chordal clearance and chordal steps between consecutive image points
    if a is INFINITY:
        lclear = -_lhyp(tr.L.real)
        lh = _lhyp(g.real)  # hypot(1, |1/f|)
    else:
        lclear = g.real - _lhyp(tr.L.real) - math.log(math.hypot(1.0, abs(a)))
        lh = _lhyp(tr.L.real)
    step = logspace.logsub(g[1:], g[:-1]).real - lh[1:] - lh[:-1]
    return g, lclear, step


def _target_flags(tr: _Track, a: ExtComplex, log_tol: float) -> np.ndarray:
    g, lclear, step = _target_state(tr, a, log_tol)
    dg = _wrap(np.diff(g.imag))
    bound = np.minimum(math.log(0.2), np.minimum(lclear[1:], lclear[:-1]) - math.log(2.0))
    flags = (np.abs(dg) >= np.pi / 2) | (step >= bound)
    if a is not INFINITY and abs(a - 1) <= 1e-12:
        flags |= tr.factor_flags(relative=True)
    return flags


def _refine(tr: _Track, flag_fn, max_depth: int) -> None:
    while True:
        flags = flag_fn(tr)
        if not np.any(flags):
            return
        idx = np.nonzero(flags)[0]
        if int(tr.level[idx].max()) >= max_depth:
            raise RefinementLimit(f"bisection depth {max_depth} exhausted on {tr.arc}")
        tr.bisect(idx)


def _initial_samples(arc: Arc) -> int:
    return max(64, int(math.ceil(arc.length / 0.02)))


def winding_numbers(fun: ToppilaFunction, contour: Contour, targets, tol: float | None = None,
                    max_depth: int = MAX_DEPTH) -> list[WindingResult]:
    """Winding of fun o contour about each target (about 0 for 1/fun when a = infinity).

    Samples are shared between targets, so asking for many values at once is
    much cheaper than separate calls.  Results are deterministic.
    """
    if not contour.closed:
        raise ValueError("winding needs a closed contour")
    tol = fun.params.winding_tol if tol is None else tol
    log_tol = math.log(tol)
    tracks = [_Track(fun, arc, _initial_samples(arc)) for arc in contour.pieces]
    for tr in tracks:
        _refine(tr, lambda t: t.factor_flags(), max_depth)
    out = []
    for a in targets:
        a = as_ext(a)
        for tr in tracks:
            _refine(tr, lambda t: _target_flags(t, a, log_tol), max_depth)
        total = 0.0
        lmin = math.inf
        ends = []
        for tr in tracks:
            g, lclear, _ = _target_state(tr, a, log_tol)
            total += float(np.sum(_wrap(np.diff(g.imag))))
            lmin = min(lmin, float(np.min(lclear)))
            ends.append((g[0], g[-1]))
        for i in range(len(ends)):
            total += float(_wrap(np.array(ends[(i + 1) % len(ends)][0].imag - ends[i][1].imag)))
        turns = total / (2 * math.pi)
        w = int(round(turns))
        if abs(turns - w) > 0.25:
            raise ArithmeticError(f"argument tracking did not close up ({turns:.4f} turns)")
        samples = int(sum(tr.s.size for tr in tracks))
        out.append(WindingResult(w, samples, math.exp(lmin), lmin))
    return out


def winding_number(fun: ToppilaFunction, contour: Contour, a, tol: float | None = None,
                   max_depth: int = MAX_DEPTH) -> WindingResult:
    return winding_numbers(fun, contour, [a], tol, max_depth)[0]


# --- counting in disks --------------------------------------------------------

def _enumerate(fun: ToppilaFunction, a: ExtComplex, mask_fn) -> int:
    return fun.count_points("pole" if a is INFINITY else "zero", mask_fn)


def _pole_side(fun: ToppilaFunction, a: ExtComplex, mask_fn) -> int:
    """Poles of f - a (finite a) or of 1/f (a = infinity) selected by mask_fn."""
    return fun.count_points("zero" if a is INFINITY else "pole", mask_fn)


def jitter_radii(r: float, steps: int = JITTER_STEPS):
    yield r
    for m in range(steps):
        yield r * (1.0 + 2.0 ** (-m) * 1e-6)


def _check_radius(fun: ToppilaFunction, r: float) -> None:
    if not (r > 0):
        raise ValueError("radius must be positive")
    if r * (1 + 1e-6) > fun.eval_radius:
        raise DomainError(f"r = {r} exceeds the evaluation radius {fun.eval_radius}")


def count_in_disk_many(fun: ToppilaFunction, r: float, targets, method: str = "auto",
                       tol: float | None = None) -> list[CountResult]:
    """n(r, a) for several a; 0 and infinity are enumerated exactly unless method='winding'."""
    _check_radius(fun, r)
    targets = [as_ext(a) for a in targets]
    results: dict[int, CountResult] = {}
    pending = []
    for i, a in enumerate(targets):
        if method == "auto" and (a is INFINITY or a == 0):
            n = _enumerate(fun, a, lambda z: np.abs(z) <= r)
            results[i] = CountResult(n, 0, math.inf, r)
        else:
            pending.append(i)
    if pending:
        last_err: Exception | None = None
        for rr in jitter_radii(r):
            try:
                wr = winding_numbers(fun, Contour.circle(0j, rr), [targets[i] for i in pending], tol)
            except (ClearanceExhausted, RefinementLimit) as err:
                last_err = err
                continue
            for i, res in zip(pending, wr):
                a = targets[i]
                n = res.winding + _pole_side(fun, a, lambda z: np.abs(z) <= rr)
                if n < 0:
                    raise ArithmeticError(f"negative a-point count {n} for a={a}, r={rr}")
                results[i] = CountResult(n, res.samples_used, res.min_chordal_clearance, rr)
            break
        else:
            raise ClearanceExhausted(f"jitter sequence exhausted at r={r}: {last_err}")
    return [results[i] for i in range(len(targets))]


def count_in_disk_detail(fun: ToppilaFunction, r: float, a, method: str = "auto",
                         tol: float | None = None) -> CountResult:
    return count_in_disk_many(fun, r, [a], method, tol)[0]


def count_in_disk(fun: ToppilaFunction, r: float, a, method: str = "auto",
                  tol: float | None = None) -> int:
    """n(r, a): a-points of fun in the closed disk |z| <= r, with multiplicity."""
    return count_in_disk_detail(fun, r, a, method, tol).count


# --- counting in the annuli U_k ------------------------------------------------

@dataclass(frozen=True)
class CellGeometry:
    """The circles C_a^k, C_b^k bounding U_k and the disk B(0, r) cutting it."""

    k: int
    r: float
    ca: complex
    ra: float
    cb: complex
    rb: float

    @classmethod
    def of(cls, fun: ToppilaFunction, k: int, r: float) -> "CellGeometry":
        cell = fun.cell(k)
        ca, ra = cell.circle_a(fun.params.delta)
        cb, rb = cell.circle_b(fun.params.delta)
        return cls(k, float(r), ca, ra, cb, rb)

    def case(self) -> str:
        """'enclosed', 'disjoint', 'lens' (C_b outside), 'lens-minus-b' or 'gamma'."""
        r = self.r
        if r >= abs(self.ca) + self.ra:
            return "enclosed"
        if r <= abs(self.ca) - self.ra:
            return "disjoint"
        if r <= abs(self.cb) - self.rb:
            return "lens"
        if r >= abs(self.cb) + self.rb:
            return "lens-minus-b"
        return "gamma"

    def in_region(self, z: np.ndarray) -> np.ndarray:
        """Membership of U_k intersected with the closed disk."""
        z = np.asarray(z)
        return (np.abs(z) <= self.r) & (np.abs(z - self.ca) < self.ra) & (np.abs(z - self.cb) > self.rb)

    def _cut(self, c: complex, rho: float) -> tuple[float, float]:
        """(theta, phi): S(0, r) meets S(c, rho) at r e^{i(arg c +- theta)}; phi is the
        angle at c between the direction to the origin and an intersection point."""
        d = abs(c)
        cos_t = (self.r ** 2 + d * d - rho * rho) / (2 * self.r * d)
        theta = math.acos(max(-1.0, min(1.0, cos_t)))
        z = self.r * cmath.exp(1j * (cmath.phase(c) + theta))
        phi = abs(cmath.phase((z - c) / (-c)))
        return theta, phi

    def contours(self) -> list[tuple[int, Contour]]:
        """Signed contours whose winding sum counts a-points minus poles in the region."""
        case = self.case()
        if case == "disjoint":
            return []
        if case == "enclosed":
            return [(1, Contour.circle(self.ca, self.ra)), (-1, Contour.circle(self.cb, self.rb))]
        dir_ = cmath.phase(self.ca)
        back = dir_ + math.pi
        ta, pa = self._cut(self.ca, self.ra)
        if case in ("lens", "lens-minus-b"):
            lens = Contour((Arc(0j, self.r, dir_ - ta, dir_ + ta),
                            Arc(self.ca, self.ra, back - pa, back + pa)))
            if case == "lens":
                return [(1, lens)]
            return [(1, lens), (-1, Contour.circle(self.cb, self.rb))]
        tb, pb = self._cut(self.cb, self.rb)
        gamma = Contour((
            Arc(0j, self.r, dir_ + tb, dir_ + ta),
            Arc(self.ca, self.ra, back - pa, back + pa),
            Arc(0j, self.r, dir_ - ta, dir_ - tb),
            Arc(self.cb, self.rb, back + pb, back - pb),
        ))
        return [(1, gamma)]


def count_in_cell_many(fun: ToppilaFunction, k: int, r: float, targets, method: str = "auto",
                       tol: float | None = None) -> list[CountResult]:
    """n_k(r, a, fun): a-points in U_k intersected with the closed disk |z| <= r."""
    geo = CellGeometry.of(fun, k, r)
    targets = [as_ext(a) for a in targets]
    results: dict[int, CountResult] = {}
    pending = []
    for i, a in enumerate(targets):
        if geo.case() == "disjoint":
            results[i] = CountResult(0, 0, math.inf, r)
        elif method == "auto" and (a is INFINITY or a == 0):
            results[i] = CountResult(_enumerate(fun, a, geo.in_region), 0, math.inf, r)
        else:
            pending.append(i)
    if pending:
        last_err: Exception | None = None
        for rr in jitter_radii(r):
            g = CellGeometry.of(fun, k, rr)
            try:
                parts = [(sgn, winding_numbers(fun, c, [targets[i] for i in pending], tol))
                         for sgn, c in g.contours()]
            except (ClearanceExhausted, RefinementLimit) as err:
                last_err = err
                if g.case() == "enclosed":
                    break  # the radius plays no role; jitter cannot help
                continue
            for j, i in enumerate(pending):
                a = targets[i]
                w = sum(sgn * res[j].winding for sgn, res in parts)
                n = w + _pole_side(fun, a, g.in_region)
                samples = sum(res[j].samples_used for _, res in parts)
                clear = min(res[j].min_chordal_clearance for _, res in parts)
                results[i] = CountResult(n, samples, clear, rr)
            break
        if len(results) < len(targets):
            raise ClearanceExhausted(f"cell {k} count failed at r={r}: {last_err}")
    return [results[i] for i in range(len(targets))]


def count_in_cell(fun: ToppilaFunction, k: int, r: float, a, method: str = "auto",
                  tol: float | None = None) -> int:
    return count_in_cell_many(fun, k, r, [a], method, tol)[0].count


def halfplane_count_exact(fun: ToppilaFunction, j: int, r: float, a) -> int:
    """n_j^*(r, a): listed a-points (a = 0 or infinity) in U_j with Re(z e^{-i alpha_j}) <= r.

    Only the boundary roots of cell j lie in U_j; the special point sits
    inside D_k away from U_j and is therefore never counted.
    """
    a = as_ext(a)
    if not (a is INFINITY or a == 0):
        raise ValueError("half-plane counts are exact only for a = 0 or infinity")
    cell = fun.cell(j)
    sign = fun.sign(j)
    roots_are_zeros = sign > 0
    if (a == 0) != roots_are_zeros:
        return 0
    proj = (cell.roots * np.conj(cell.rotation)).real
    return int(np.count_nonzero(proj <= r))


def probe_values(probe_grid_size: int) -> list[ExtComplex]:
    return [0j, INFINITY, 1 + 0j] + sphere_grid(probe_grid_size)


def max_valence(fun: ToppilaFunction, r: float, probe_grid_size: int = 64,
                tol: float | None = None) -> tuple[int, ExtComplex]:
    """max over probes a of n(r, a) and the first probe attaining it."""
    probes = probe_values(probe_grid_size)
    counts = count_in_disk_many(fun, r, probes, tol=tol)
    best = max(range(len(probes)), key=lambda i: (counts[i].count, -i))
    return counts[best].count, probes[best]


def count_rows(r: float, targets, results: list[CountResult]) -> list[dict]:
    """Rows for the `count` CSV."""
    rows = []
    for a, res in zip(targets, results):
        a = as_ext(a)
        inf = a is INFINITY
        rows.append(dict(r=res.r, a_re=0.0 if inf else a.real, a_im=0.0 if inf else a.imag,
                         a_is_inf=int(inf), count=res.count, samples=res.samples,
                         clearance=res.clearance))
    return rows
