"""Sampled machine checks of the inequalities the construction relies on.

Every check returns a :class:`CheckReport` with the measured quantity, the
bound it is compared against and a signed margin (negative on failure).
Bounds that are only meaningful as epsilon -> 0 are reported as
``informational`` instead of being passed or failed.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .construction import Params, ToppilaFunction, constraint_values
from .logspace import log1m_exp
from .moebius import T_MAP, inverse
from .sphere import INFINITY, in_region_x, sphere_grid
from .winding import count_in_cell_many, halfplane_count_exact

CIRCLE_SAMPLES = 2048
REGION_SAMPLES = 1000
STATUSES = ("pass", "fail", "informational")

POLE_FRACTION = (0.60817, 0.60818)
ZERO_FRACTION = (0.78365, 0.78366)
ZERO_FRACTION_BOUND = 0.78366
POLE_FRACTION_BOUND = 0.60818
POLE_FRACTION_LOWER = 0.60817
COUNT_PROBES = (1j, -1 + 0j, 2j, -0.5j, 3 + 0j)


@dataclass(frozen=True)
class CheckReport:
    check_id: str
    anchor: str
    status: str
    measured: float
    bound: float
    margin: float

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}")
        if self.status == "fail" and not self.margin < 0:
            raise ValueError("a failed check must carry a negative margin")

    def csv_row(self) -> dict:
        return dict(check_id=self.check_id, anchor=self.anchor, status=self.status,
                    measured=self.measured, bound=self.bound, margin=self.margin)


def _upper(check_id: str, anchor: str, measured: float, bound: float, info: bool = False) -> CheckReport:
    """measured < bound."""
    margin = bound - measured
    status = "informational" if info else ("pass" if margin > 0 else "fail")
    if status == "fail" and margin == 0:
        margin = -1e-300
    return CheckReport(check_id, anchor, status, float(measured), float(bound), float(margin))


def _lower(check_id: str, anchor: str, measured: float, bound: float, info: bool = False) -> CheckReport:
    """measured > bound."""
    margin = measured - bound
    status = "informational" if info else ("pass" if margin > 0 else "fail")
    if status == "fail" and margin == 0:
        margin = -1e-300
    return CheckReport(check_id, anchor, status, float(measured), float(bound), float(margin))


def _equal(check_id: str, anchor: str, measured: float, target: float, tol: float) -> CheckReport:
    """|measured - target| <= tol; the margin is tol minus the deviation."""
    margin = tol - abs(measured - target)
    if margin < 0:
        return CheckReport(check_id, anchor, "fail", float(measured), float(target), float(margin))
    return CheckReport(check_id, anchor, "pass", float(measured), float(target), float(margin))


def _circle(center: complex, radius: float, count: int = CIRCLE_SAMPLES) -> np.ndarray:
    return center + radius * np.exp(2j * np.pi * (np.arange(count) + 0.5) / count)


# chordal distances from exp(L) to 0, infinity, 1 (real parts of logs are enough)
def _half_log_hypot(lre: np.ndarray) -> np.ndarray:
    return 0.5 * np.logaddexp(0.0, 2.0 * np.clip(lre, -800.0, 800.0))


def _chord_to_zero(lre: np.ndarray) -> np.ndarray:
    return np.exp(np.clip(lre, -800.0, 800.0) - _half_log_hypot(lre))


def _chord_to_inf(lre: np.ndarray) -> np.ndarray:
    return np.exp(-_half_log_hypot(lre))


def _chord_to_one(lre: np.ndarray, log_minus_one_re: np.ndarray) -> np.ndarray:
    return np.exp(np.clip(log_minus_one_re, -800.0, 800.0) - _half_log_hypot(lre) - 0.5 * math.log(2.0))


# --- constants ------------------------------------------------------------------

def check_constants() -> list[CheckReport]:
    out = []
    with mpmath.workdps(40):
        pole = 1 - mpmath.atan(2 * mpmath.sqrt(2)) / mpmath.pi
        zero = 1 - mpmath.atan(4 * mpmath.sqrt(2) / 7) / mpmath.pi
        for name, val, (lo, hi), what in (
            ("const-pole-fraction", pole, POLE_FRACTION, "1 - arctan(2 sqrt 2)/pi"),
            ("const-zero-fraction", zero, ZERO_FRACTION, "1 - arctan(4 sqrt 2 / 7)/pi"),
        ):
            margin = float(min(val - lo, hi - val))
            status = "pass" if margin > 0 else "fail"
            out.append(CheckReport(name, f"{what} lies in ({lo}, {hi})", status, float(val),
                                   hi if val - lo > hi - val else lo, margin))
    s2 = math.sqrt(2.0)
    images = (
        ("const-t-image-upper", complex(-1 / 3, 2 * s2 / 3), complex(1 / 3, 2 * s2 / 3),
         "T(-1/3 + 2i sqrt2/3) = 1/3 + 2i sqrt2/3"),
        ("const-t-image-second", complex(1 / 3, 2 * s2 / 3), complex(7 / 9, 4 * s2 / 9),
         "T(1/3 + 2i sqrt2/3) = 7/9 + 4i sqrt2/9"),
    )
    for name, z, w, what in images:
        out.append(_equal(name, what, abs(T_MAP(z) - w), 0.0, 1e-14))
    # slope of T on the unit circle: Im T / Re T = 8 sqrt(1-x^2) / (10x + 6)
    x = np.linspace(-1.0, 1.0, 10001)
    x = x[np.abs(10 * x + 6) > 1e-3]
    t = T_MAP.apply_array(x + 1j * np.sqrt(1 - x * x))
    dev = np.max(np.abs(t.imag * (10 * x + 6) - t.real * 8 * np.sqrt(1 - x * x)))
    out.append(_equal("const-t-slope", "Im T / Re T = 8 sqrt(1-x^2)/(10x+6) on the unit circle", dev, 0.0, 1e-12))
    # the reciprocal distortion (1 + x^2)/(1 + (x+1)^2) >= (5 - sqrt5)/(5 + sqrt5) for x >= 0
    xs = np.linspace(0.0, 50.0, 200001)
    worst = float(np.min((1 + xs ** 2) / (1 + (xs + 1) ** 2)))
    s5 = math.sqrt(5.0)
    out.append(_lower("const-reciprocal-distortion", "(1+x^2)/(1+(x+1)^2) >= (5-sqrt5)/(5+sqrt5), x >= 0",
                      worst + 1e-15, (5 - s5) / (5 + s5)))
    out.append(_upper("const-length-factor", "(5+sqrt5)/(5-sqrt5) * 63 < 165",
                      (5 + s5) / (5 - s5) * 63.0, 165.0))
    return out


# --- geometry -------------------------------------------------------------------

def t_boundary_angle(x: np.ndarray) -> np.ndarray:
    """alpha(x) = Arg T(x + i sqrt(1 - x^2)), continuous on [-1, 1] with values in [0, pi]."""
    x = np.asarray(x, dtype=float)
    w = T_MAP.apply_array(x + 1j * np.sqrt(np.clip(1 - x * x, 0.0, None)))
    # T keeps the upper half plane, so Arg is in [0, pi]; abs folds the rounding at 0 and pi
    return np.abs(np.angle(w))


def check_geometry(p: Params, fun: ToppilaFunction | None = None) -> list[CheckReport]:
    fun = fun or ToppilaFunction.build(p)
    d = p.delta
    out = []
    tinv = inverse(T_MAP)
    for name, m, rad, lo, hi, what in (
        ("geom-t-outer", T_MAP, 1 + d, 1 + d / 3, 1 + 3 * d, "T(S(0,1+delta)) in A(0,1+delta/3,1+3delta)"),
        ("geom-t-inner", T_MAP, 1 - d, 1 - 3 * d, 1 - d / 3, "T(S(0,1-delta)) in A(0,1-3delta,1-delta/3)"),
        ("geom-tinv-outer", tinv, 1 + d, 1 + d / 3, 1 + 3 * d, "T^-1(S(0,1+delta)) in A(0,1+delta/3,1+3delta)"),
        ("geom-tinv-inner", tinv, 1 - d, 1 - 3 * d, 1 - d / 3, "T^-1(S(0,1-delta)) in A(0,1-3delta,1-delta/3)"),
    ):
        mod = np.abs(m.apply_array(_circle(0j, rad)))
        margin = min(mod.min() - lo, hi - mod.max())
        measured = mod.min() if mod.min() - lo < hi - mod.max() else mod.max()
        status = "pass" if margin > 0 else "fail"
        out.append(CheckReport(name, what, status, float(measured), lo if measured == mod.min() else hi,
                               float(margin)))

    x = np.linspace(-1.0, 1.0, 10001)
    alpha = t_boundary_angle(x)
    steps = np.diff(alpha)
    out.append(_upper("geom-alpha-decreasing", "Arg T(x + i sqrt(1-x^2)) decreases from pi to 0",
                      float(steps.max()), 0.0))
    se = p.sqrt_eps
    fine = np.linspace(-1.0, 1.0, 200001)
    af = t_boundary_angle(fine)
    h = fine[1] - fine[0]
    for s, tag in ((1e-2, "0.01"), (se, "sqrt-eps"), (3 * se, "3sqrt-eps")):
        shift = int(round(s / h))
        s_eff = shift * h
        worst = float(np.max(np.abs(af[shift:] - af[:-shift])))
        edge = float(t_boundary_angle(np.array([-1.0]))[0] - t_boundary_angle(np.array([-1.0 + s_eff]))[0])
        out.append(_upper(f"geom-alpha-continuity-{tag}",
                          "|alpha(x1)-alpha(x2)| <= alpha(-1)-alpha(-1+s) < 4 sqrt(s) for |x1-x2| = s",
                          max(worst, edge), 4 * math.sqrt(s_eff)))
        out.append(_upper(f"geom-alpha-edge-{tag}", "the largest angle change at step s sits at x = -1",
                          worst - edge, 1e-9))

    for key, (lhs, rhs, _) in constraint_values(p).items():
        out.append(_upper(f"params-{key}", _PARAM_TEXT[key], lhs, rhs))

    centers = [c.center for c in fun.cells]
    gap = min((abs(a - b) - 3.0 for i, a in enumerate(centers) for b in centers[i + 1:]), default=math.inf)
    out.append(_lower("geom-cell-gap", "distance between any two disks D_j, D_k is at least 1",
                      gap + 1e-12, 1.0))

    worst_out, worst_in, worst_la, worst_lb = -math.inf, math.inf, math.inf, math.inf
    root_dev, special_dev = 0.0, 0.0
    for c in fun.cells:
        ca, ra = c.circle_a(d)
        cb, rb = c.circle_b(d)
        worst_out = max(worst_out, abs(ca - c.center) + ra)
        worst_in = min(worst_in, rb - abs(cb - c.center))
        la = np.abs(c.to_local(_circle(ca, ra)))
        lb = np.abs(c.to_local(_circle(cb, rb)))
        worst_la = min(worst_la, la.min() - (1 + d / 3), (1 + 3 * d) - la.max())
        worst_lb = min(worst_lb, lb.min() - (1 - 3 * d), (1 - d / 3) - lb.max())
        root_dev = max(root_dev, float(np.max(np.abs(np.abs(c.roots - c.center) - 1.5))))
        special_dev = max(special_dev, abs(T_MAP(complex(c.to_local(c.special_point)))))
    out.append(_upper("geom-u-outer", "U_k inside |z - k e^{i alpha_k}| < 3/2 + 9 delta/2",
                      worst_out, 1.5 + 4.5 * d))
    out.append(_lower("geom-u-inner", "U_k outside |z - k e^{i alpha_k}| > 3/2 - 9 delta/2",
                      worst_in, 1.5 - 4.5 * d))
    out.append(_lower("geom-la-annulus", "L_k(C_a^k) in A(0, 1+delta/3, 1+3delta): worst margin",
                      worst_la, 0.0))
    out.append(_lower("geom-lb-annulus", "L_k(C_b^k) in A(0, 1-3delta, 1-delta/3): worst margin",
                      worst_lb, 0.0))
    out.append(_equal("geom-roots-on-boundary", "every boundary root lies on the circle of radius 3/2",
                      root_dev, 0.0, 1e-10))
    out.append(_equal("geom-special-point", "T_k vanishes at the special point (k - 1/2) e^{i alpha_k}",
                      special_dev, 0.0, 1e-14))
    return out


_PARAM_TEXT = {
    "circle-gap": "(1-3delta)^2 - (1-sqrt eps)^2 exceeds sqrt eps (stored as sqrt eps < lhs)",
    "delta-small": "delta < sqrt(eps)/3",
    "tail-sum": "sum over k >= 5 of (1+delta)^(-N_k) < sqrt(eps)/6, tail included",
    "inner-decay": "(1-delta)^(N_5) < sqrt(eps)/6",
}


# --- function tracking --------------------------------------------------------

def _outside_all_cells(fun: ToppilaFunction, z: np.ndarray) -> np.ndarray:
    keep = np.ones(z.shape, dtype=bool)
    for c in fun.cells:
        ca, ra = c.circle_a(fun.params.delta)
        keep &= np.abs(z - ca) >= ra
    return keep


def check_function_tracking(fun: ToppilaFunction, seed: int = 0,
                            circle_samples: int = CIRCLE_SAMPLES,
                            region_samples: int = REGION_SAMPLES) -> list[CheckReport]:
    p = fun.params
    se, d = p.sqrt_eps, p.delta
    rng = np.random.default_rng(seed)
    worst = dict(rb=0.0, ra=0.0, sb=0.0, sa=0.0, fa=0.0, fb_odd=0.0, fb_even=0.0)
    for c in fun.cells:
        ca, ra = c.circle_a(d)
        cb, rb = c.circle_b(d)
        za, zb = _circle(ca, ra, circle_samples), _circle(cb, rb, circle_samples)
        lra = c.n * c.log_T(za).real  # log |R_k| on C_a
        lrb = c.n * c.log_T(zb).real
        worst["rb"] = max(worst["rb"], float(_chord_to_zero(lrb).max()))
        worst["ra"] = max(worst["ra"], float(_chord_to_inf(lra).max()))
        # S_k = 1 - e^{-N log T_k}
        lsb = log1m_exp(-c.n * c.log_T(zb)).real
        worst["sb"] = max(worst["sb"], float(_chord_to_inf(lsb).max()))
        lsa = log1m_exp(-c.n * c.log_T(za)).real
        worst["sa"] = max(worst["sa"], float(_chord_to_one(lsa, -lra).max()))
        # f on the same circles
        xa, la = fun.log_state(za)
        g, _ = fun.log_minus_from(xa, la, 1.0)
        worst["fa"] = max(worst["fa"], float(_chord_to_one(la.real, g.real).max()))
        lb = fun.log_value(zb).real
        if fun.sign(c.k) > 0:
            worst["fb_odd"] = max(worst["fb_odd"], float(_chord_to_inf(lb).max()))
        else:
            worst["fb_even"] = max(worst["fb_even"], float(_chord_to_zero(lb).max()))

    out = [
        _upper("track-r-on-cb", "R_k(C_b^k) in D(0, sqrt(eps)/6), all k", worst["rb"], se / 6),
        _upper("track-r-on-ca", "R_k(C_a^k) in D(inf, sqrt(eps)/6), all k", worst["ra"], se / 6),
        _upper("track-s-on-cb", "S_k(C_b^k) in D(inf, sqrt(eps)/3), all k", worst["sb"], se / 3),
        _upper("track-s-on-ca", "S_k(C_a^k) in D(1, sqrt(eps)/6), all k", worst["sa"], se / 6),
        _upper("track-f-on-ca", "f(C_a^k) in D(1, sqrt(eps)/2), all k", worst["fa"], se / 2),
        _upper("track-f-on-cb-odd", "f(C_b^k) in D(inf, sqrt(eps)) for odd k", worst["fb_odd"], se),
        _upper("track-f-on-cb-even", "f(C_b^k) in D(0, sqrt(eps)) for even k", worst["fb_even"], se),
    ]

    # |f - 1| away from every cell
    radius = fun.eval_radius
    pts = []
    while sum(len(q) for q in pts) < region_samples:
        rr = radius * np.sqrt(rng.random(region_samples))
        z = rr * np.exp(2j * np.pi * rng.random(region_samples))
        pts.append(z[_outside_all_cells(fun, z)])
    z = np.concatenate(pts)[:region_samples]
    x, L = fun.log_state(z)
    g, _ = fun.log_minus_from(x, L, 1.0)
    out.append(_upper("track-f-near-one", "|f - 1| < sqrt(eps)/2 outside every C_a^k",
                      float(np.exp(g.real).max()), se / 2))

    # f against its own factor S_k on B(center_k, 2)
    worst_close = 0.0
    for c in fun.cells:
        rr = 2.0 * np.sqrt(rng.random(region_samples))
        z = c.center + rr * np.exp(2j * np.pi * rng.random(region_samples))
        lf = fun.log_value(z)
        ls = fun.factor(c.k).log_value(z)
        if fun.sign(c.k) < 0:
            ls = -ls  # f tracks 1/S_k on even cells; the chordal metric is reciprocal invariant
        worst_close = max(worst_close, float(np.max(_chordal_logs(lf, ls))))
    out.append(_upper("track-f-vs-factor", "chordal distance of f and S_k^(+-1) on B(k e^{i alpha_k}, 2) < sqrt(eps)/2",
                      worst_close, se / 2))
    return out


def _chordal_logs(lu: np.ndarray, lv: np.ndarray) -> np.ndarray:
    """Chordal distance of e^lu and e^lv, with an exact branch for matching infinities."""
    from .sphere import chordal_between_logs
    both = (np.isposinf(lu.real) & np.isposinf(lv.real)) | (np.isneginf(lu.real) & np.isneginf(lv.real))
    return np.where(both, 0.0, chordal_between_logs(lu, lv))


# --- counting ---------------------------------------------------------------------

def _enclosing_radius(fun: ToppilaFunction, k: int) -> float:
    ca, ra = fun.cell(k).circle_a(fun.params.delta)
    return abs(ca) + ra + 0.05


def check_counting(fun: ToppilaFunction, pair_count: int = 20, seed: int = 0) -> list[CheckReport]:
    p = fun.params
    out = []
    for k in (5, 6):
        if not fun.has_cell(k):
            continue
        n_k = fun.cell(k).n
        res = count_in_cell_many(fun, k, _enclosing_radius(fun, k), COUNT_PROBES)
        worst = max(abs(r.count - n_k) for r in res)
        counts = [r.count for r in res]
        out.append(CheckReport(
            f"count-cell-{k}", f"a-points of f in U_{k} equal N_{k} = {n_k} for a in X",
            "pass" if worst == 0 else "fail", float(min(counts, key=lambda c: -abs(c - n_k))),
            float(n_k), 0.5 - worst if worst == 0 else -float(worst)))

    # same-modulus pairs around 1 for the single factor S_5 at r = 5
    k = 5
    s5 = fun.factor(k)
    n5 = fun.cell(k).n
    d = p.delta
    lo, hi = math.log((1 + d) ** (-n5 / 2)), math.log((1 - d) ** (-n5 / 2))
    rng = np.random.default_rng(seed)
    targets = []
    for i in range(pair_count):
        t = math.exp(lo + (hi - lo) * (i + 0.5) / pair_count)
        ph = 2 * math.pi * rng.random(2)
        targets += [1 + t * cmath.exp(1j * ph[0]), 1 + t * cmath.exp(1j * ph[1])]
    res = count_in_cell_many(s5, k, float(k), targets, method="winding")
    spread = max(abs(res[2 * i].count - res[2 * i + 1].count) for i in range(pair_count))
    out.append(_upper("count-same-modulus-spread",
                      "|n_5(5, a, S_5) - n_5(5, b, S_5)| <= 1 when |a-1| = |b-1|, 20 pairs",
                      spread, 1.5))

    # spread over X probes against the count of zeros (asymptotic bound eta = 4 N eps^(1/4))
    probes = [a for a in sphere_grid(16) if in_region_x(a, p.epsilon)][:24]
    base = count_in_cell_many(s5, k, float(k), [0j])[0].count
    res = count_in_cell_many(s5, k, float(k), probes)
    emp = max(abs(r.count - base) for r in res)
    eta = 4 * n5 * p.epsilon ** 0.25
    out.append(_upper("count-x-spread-vs-eta", "max over X probes |n_5(5,a,S_5) - n_5(5,0,S_5)| against eta",
                      emp, eta, info=True))

    # a-points of f and of S_5 agree off the exceptional set
    res_f = count_in_cell_many(fun, k, float(k), probes)
    diff = sum(1 for a, b in zip(res, res_f) if a.count != b.count)
    out.append(_upper("count-exceptional-fraction",
                      "fraction of X probes where f and S_5 disagree on U_5 at r = 5, against 662 eps^(1/4)",
                      diff / len(probes), 662 * p.epsilon ** 0.25, info=True))
    return out


# --- arclength ----------------------------------------------------------------------

def _crossing_angle(R: float, c: float, rho: float) -> float:
    cos_t = (R * R + c * c - rho * rho) / (2 * R * c)
    if not -1.0 <= cos_t <= 1.0:
        raise ValueError(f"circle S(0,{R}) misses the circle of radius {rho} about {c}")
    return math.acos(cos_t)


def crossing_angles(fun: ToppilaFunction, k: int, beta: float) -> tuple[float, ...]:
    """theta_1..theta_5 where S(0, k+beta) meets C'', C_b, boundary of D_k, C_a, C' (relative to alpha_k)."""
    c = fun.cell(k)
    d = fun.params.delta
    R = k + beta
    ca, ra = c.circle_a(d)
    cb, rb = c.circle_b(d)
    return (
        _crossing_angle(R, k, 1.5 - 4.5 * d),
        _crossing_angle(R, abs(cb), rb),
        _crossing_angle(R, k, 1.5),
        _crossing_angle(R, abs(ca), ra),
        _crossing_angle(R, k, 1.5 + 4.5 * d),
    )


def _gauss_panels(t0: float, t1: float, panels: int, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(t0, t1, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def spherical_lengths(fun: ToppilaFunction, k: int, beta: float, panels: int = 2000) -> dict[str, float]:
    """Spherical lengths of R_k and S_k images of the arcs of S(0, k+beta) inside the cell."""
    c = fun.cell(k)
    th = crossing_angles(fun, k, beta)
    R = k + beta

    def lengths(t0, t1):
        t, w = _gauss_panels(t0, t1, panels)
        z = R * np.exp(1j * (c.alpha + t))
        lt = c.log_T(z)
        speed = c.n * np.abs(c.dlog_T(z)) * R  # |d log R_k / d theta|
        lr = c.n * lt.real  # log |R_k|
        # |dR|/(1+|R|^2) = speed |R| / (1 + |R|^2) = speed / (2 cosh log|R|)
        r_elem = speed / (2.0 * np.cosh(np.clip(lr, -700, 700)))
        u = np.exp(np.clip(-c.n * lt, -700 + 0j, 700 + 0j))  # 1/R_k
        s_elem = speed * np.abs(u) / (1.0 + np.abs(1.0 - u) ** 2)
        return float(np.dot(w, r_elem)), float(np.dot(w, s_elem))

    g2, s2 = lengths(th[1], th[2])
    g3, s3 = lengths(th[2], th[3])
    return dict(gamma2=g2, gamma3=g3, gamma23=g2 + g3, gamma_prime=s2 + s3)


def check_arclength(fun: ToppilaFunction, k: int = 5, beta: float = 0.0) -> list[CheckReport]:
    p = fun.params
    if abs(beta) > 1.5 - 1.5 * p.sqrt_eps:
        raise ValueError(f"|beta| = {abs(beta)} exceeds 3/2 - 3/2 sqrt(eps)")
    e4 = p.epsilon ** 0.25
    ln = spherical_lengths(fun, k, beta)
    coarse = spherical_lengths(fun, k, beta, panels=1000)
    drift = max(abs(ln[key] - coarse[key]) for key in ln)
    tag = f"k{k}-b{beta:g}"
    return [
        _upper(f"arc-gamma3-{tag}", "spherical length of R_k(gamma_3) <= 36/eps^(1/4)", ln["gamma3"], 36 / e4),
        _upper(f"arc-gamma3-beta-{tag}", "spherical length of R_k(gamma_3) <= 54/sqrt(9/4 - beta^2)",
               ln["gamma3"], 54 / math.sqrt(2.25 - beta * beta)),
        _upper(f"arc-gamma2-{tag}", "spherical length of R_k(gamma_2) <= 27/eps^(1/4)", ln["gamma2"], 27 / e4),
        _upper(f"arc-gamma23-{tag}", "spherical length of R_k(gamma_2 u gamma_3) <= 63/eps^(1/4)",
               ln["gamma23"], 63 / e4),
        _upper(f"arc-gamma-prime-{tag}", "spherical length of S_k(gamma_2 u gamma_3) <= 165/eps^(1/4)",
               ln["gamma_prime"], 165 / e4),
        _upper(f"arc-quadrature-{tag}", "length quadrature stable under panel halving", drift, 1e-8),
    ]


def argument_profile(fun: ToppilaFunction, k: int, beta: float, samples: int = 20001) -> int:
    """Number of sign changes of d/dtheta arg T_k((k+beta) e^{i(alpha_k+theta)}) on (0, pi)."""
    c = fun.cell(k)
    t = np.linspace(0.0, math.pi, samples)[1:-1]
    z = (k + beta) * np.exp(1j * (c.alpha + t))
    arg = np.unwrap(np.angle(T_MAP.apply_array(c.to_local(z))))
    step = np.sign(np.diff(arg))
    step = step[step != 0]
    return int(np.count_nonzero(step[1:] != step[:-1]))


def check_argument_cases(fun: ToppilaFunction, k: int = 5) -> list[CheckReport]:
    """Empirical monotonicity of arg T_k along S(0, k+beta) in the three beta regimes."""
    out = []
    for beta, expected in ((-1.0, 0), (-0.5, 0), (0.0, 1), (0.8, 1)):
        changes = argument_profile(fun, k, beta)
        out.append(CheckReport(
            f"arg-profile-k{k}-b{beta:g}",
            "arg T_k on S(0,k+beta): monotone for beta <= -1/2, one turn for beta > -1/2",
            "informational", float(changes), float(expected), float(-abs(changes - expected))))
    return out


# --- half-plane fractions ---------------------------------------------------------

def check_halfplane_fractions(fun: ToppilaFunction, ks=(5, 7)) -> list[CheckReport]:
    p = fun.params
    se = p.sqrt_eps
    e4 = p.epsilon ** 0.25
    out = []

    def n(j):
        return fun.cell(j).n

    def star(j, r, a):
        return halfplane_count_exact(fun, j, r, a)

    for k in ks:
        half = k + 0.5
        rp = half + 1.5 * se
        rm = half - 3.0 * se
        if fun.has_cell(k):
            out.append(_upper(f"frac-zero-k{k}", f"n*_{k}(k+1/2, 0)/N_k <= 0.78366 + 2/N_k",
                              star(k, half, 0) / n(k), ZERO_FRACTION_BOUND + 2 / n(k)))
            out.append(_upper(f"frac-zero-wide-k{k}", f"n*_{k}(k+1/2+3/2 sqrt eps, 0)/N_k < 0.78366 + (4/pi) eps^(1/4)",
                              star(k, rp, 0) / n(k), ZERO_FRACTION_BOUND + 4 / math.pi * e4 + 2 / n(k)))
        if fun.has_cell(k + 1):
            out.append(_upper(f"frac-pole-k{k}", f"n*_{k + 1}(k+1/2, inf)/N_{{k+1}} <= 0.60818 + 2/N",
                              star(k + 1, half, INFINITY) / n(k + 1), POLE_FRACTION_BOUND + 2 / n(k + 1)))
            out.append(_upper(f"frac-pole-wide-k{k}",
                              f"n*_{k + 1}(k+1/2+3/2 sqrt eps, inf)/N < 0.60818 + (4/pi) eps^(1/4)",
                              star(k + 1, rp, INFINITY) / n(k + 1),
                              POLE_FRACTION_BOUND + 4 / math.pi * e4 + 2 / n(k + 1)))
            out.append(_lower(f"frac-pole-narrow-k{k}",
                              f"n*_{k + 1}(k+1/2-3 sqrt eps, inf)/N > 0.60817 - (8/pi) eps^(1/4)",
                              star(k + 1, rm, INFINITY) / n(k + 1),
                              POLE_FRACTION_LOWER - 8 / math.pi * e4 - 2 / n(k + 1)))
        if fun.has_cell(k + 2):
            out.append(_upper(f"frac-beyond-k{k}", f"n*_{k + 2}(k+1/2+3/2 sqrt eps, 0)/N < (4/pi) eps^(1/4)",
                              star(k + 2, rp, 0) / n(k + 2), 4 / math.pi * e4 + 2 / n(k + 2)))
        if fun.has_cell(k - 1):
            out.append(_equal(f"frac-previous-k{k}", f"n*_{k - 1}(k+1/2, inf) = N_{{k-1}}",
                              star(k - 1, half, INFINITY), n(k - 1), 0.0))
            out.append(_lower(f"frac-previous-narrow-k{k}",
                              f"n*_{k - 1}(k+1/2-3 sqrt eps, inf)/N > 1 - (8/pi) eps^(1/4)",
                              star(k - 1, rm, INFINITY) / n(k - 1), 1 - 8 / math.pi * e4 - 2 / n(k - 1)))
    return out


def tangency_radius(fun: ToppilaFunction, j: int, a, step: float = 0.01) -> float:
    """Smallest grid r from which n_j(r, a) >= n*_j(r - 3/2 sqrt eps, a) holds up to the cell's far edge.

    n_j(r, a) counts the listed a-points of cell j in U_j with |z| <= r;
    only a = 0 and infinity have exact lists.
    """
    c = fun.cell(j)
    se = fun.params.sqrt_eps
    rows = np.arange(j - 1.5, j + 1.5 + step / 2, step)
    ok = []
    for r in rows:
        if halfplane_count_exact(fun, j, r - 1.5 * se, a) == 0:
            ok.append(True)
            continue
        in_disk = _disk_count(fun, c, j, r, a)
        ok.append(in_disk >= halfplane_count_exact(fun, j, r - 1.5 * se, a))
    ok = np.array(ok)
    bad = np.nonzero(~ok)[0]
    return float(rows[0] if len(bad) == 0 else rows[min(bad[-1] + 1, len(rows) - 1)])


def _disk_count(fun: ToppilaFunction, c, j: int, r: float, a) -> int:
    sign = fun.sign(j)
    if (a == 0) != (sign > 0):
        return 0
    return int(np.count_nonzero(np.abs(c.roots) <= r))


def check_tangency(fun: ToppilaFunction) -> list[CheckReport]:
    out = []
    for c in fun.cells:
        a = 0 if fun.sign(c.k) > 0 else INFINITY
        r0 = tangency_radius(fun, c.k, a)
        out.append(CheckReport(f"tangency-r0-k{c.k}",
                               "empirical radius beyond which the disk count dominates the shifted half-plane count",
                               "informational", r0, float(c.k - 1.5), float(c.k - 1.5 - r0)))
    return out


# --- suite ------------------------------------------------------------------------

def run_all(fun: ToppilaFunction | None = None, seed: int = 0) -> list[CheckReport]:
    fun = fun or ToppilaFunction.build()
    reports: list[CheckReport] = []
    reports += check_constants()
    reports += check_geometry(fun.params, fun)
    reports += check_function_tracking(fun, seed)
    reports += check_counting(fun, seed=seed)
    for k in (5, 6):
        if fun.has_cell(k):
            reports += check_arclength(fun, k, 0.0)
    reports += check_argument_cases(fun)
    reports += check_halfplane_fractions(fun)
    reports += check_tangency(fun)
    return reports


def failures(reports: list[CheckReport]) -> list[CheckReport]:
    return [r for r in reports if r.status == "fail"]


def format_table(reports: list[CheckReport]) -> str:
    width = max(len(r.check_id) for r in reports)
    lines = [f"{'check':<{width}}  status         measured           bound              margin"]
    for r in reports:
        lines.append(f"{r.check_id:<{width}}  {r.status:<13}  {r.measured:<17.10g}  {r.bound:<17.10g}  {r.margin:.3g}")
    return "\n".join(lines)
