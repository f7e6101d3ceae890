"""Ratio machinery: the objective in C, its maximiser, finite-k predictions and r-sweeps."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .area import AreaResult, area_counting_oracle, area_quadrature
from .construction import ToppilaFunction
from .sphere import INFINITY, ExtComplex
from .winding import halfplane_count_exact, max_valence

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
FRACTION_ZERO_EXACT = 1.0 - math.atan(4.0 * math.sqrt(2.0) / 7.0) / math.pi
FRACTION_POLE_EXACT = 1.0 - math.atan(2.0 * math.sqrt(2.0)) / math.pi


@dataclass(frozen=True)
class RatioModel:
    """1 + gap / (1/(C-1) + fraction_zero + fraction_pole C).

    The defaults are the five-decimal constants as printed in the source
    argument, which round fraction_zero up in the fifth place;
    :meth:`from_arctan` rebuilds them from the arctangent expressions.
    """

    fraction_zero: float = 0.78367
    fraction_pole: float = 0.60818
    numerator_gap: float = 0.21633

    def __post_init__(self):
        if not (0.0 < self.fraction_pole < self.fraction_zero < 1.0):
            raise ValueError("need 0 < fraction_pole < fraction_zero < 1")
        if not self.numerator_gap > 0:
            raise ValueError("numerator_gap must be positive")

    @classmethod
    def from_arctan(cls) -> "RatioModel":
        return cls(FRACTION_ZERO_EXACT, FRACTION_POLE_EXACT, 1.0 - FRACTION_ZERO_EXACT)


def ratio_objective(model: RatioModel, C: float) -> float:
    if not C > 1.0:
        raise ValueError(f"C must exceed 1, got {C}")
    if math.isinf(C):
        return 1.0
    return 1.0 + model.numerator_gap / (1.0 / (C - 1.0) + model.fraction_zero + model.fraction_pole * C)


def golden_section_max(fn, lo: float, hi: float, xtol: float = 1e-8) -> float:
    """Maximiser of a unimodal function on [lo, hi], to an interval of width < xtol."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a >= xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class Optimum:
    C_star: float
    value: float
    closed_form: float


def optimize_C(model: RatioModel = RatioModel(), lo: float = 1.0 + 1e-6, hi: float = 100.0) -> Optimum:
    """Golden-section maximiser of ratio_objective, checked against 1 + fraction_pole^(-1/2)."""
    c_star = golden_section_max(lambda c: ratio_objective(model, c), lo, hi, 1e-8)
    closed = 1.0 + model.fraction_pole ** -0.5
    if abs(c_star - closed) > 1e-6:
        raise ArithmeticError(f"golden section {c_star} disagrees with closed form {closed}")
    return Optimum(c_star, ratio_objective(model, c_star), closed)


def objective_table(model: RatioModel, c_min: float = 1.05, c_max: float = 6.0, steps: int = 100) -> list[tuple[float, float]]:
    return [(c, ratio_objective(model, c))
            for c in (c_min + (c_max - c_min) * i / (steps - 1) for i in range(steps))]


def toppila_reference() -> float:
    """The earlier lower-limit value 80/79 for the same ratio."""
    return 80.0 / 79.0


# --- finite-k predictions ---------------------------------------------------------

@dataclass(frozen=True)
class RatioCounts:
    """Counts entering the lower bound for n(r)/A(r) around r = k + 1/2.

    value = (before + lower + N_k + upper_num) / (before_den + zero_k + upper_den + beyond)
    """

    before: float  # sum of N_j over completed cells j <= k - 2
    lower: float  # count of cell k - 1 in the numerator
    n_k: float
    upper_num: float  # count of cell k + 1 in the numerator
    before_den: float
    zero_k: float  # n_k^*(., 0) in the denominator
    upper_den: float
    beyond: float = 0.0  # cell k + 2 (second interval only)

    @property
    def numerator(self) -> float:
        return self.before + self.lower + self.n_k + self.upper_num

    @property
    def denominator(self) -> float:
        return self.before_den + self.zero_k + self.upper_den + self.beyond

    def value(self) -> float:
        return self.numerator / self.denominator


INTERVALS = ("I1", "I2")


def _oriented(fun: ToppilaFunction, k: int) -> ToppilaFunction:
    """f for odd k; 1/f for even k, which swaps the roles of 0 and infinity."""
    return fun if k % 2 else fun.reciprocal()


def prediction_counts(fun: ToppilaFunction, k: int, interval: str = "I1",
                      asymptotic: bool = False, model: RatioModel = RatioModel()) -> RatioCounts:
    """Counts of the finite-k lower bound on the first (I1) or second (I2) interval.

    Exact mode enumerates n_j^* from the root lists of the truncated function;
    cells with j < 5 do not exist and cells beyond k_max are absent from it,
    so both count as 0.  Asymptotic mode uses the fractions of ``model`` and
    N_j from the degree formula for every j >= 5.
    """
    if interval not in INTERVALS:
        raise ValueError(f"interval must be one of {INTERVALS}")
    p = fun.params
    if not (5 <= k <= p.k_max):
        raise ValueError(f"cell {k} not built (cells 5..{p.k_max})")
    g = _oriented(fun, k)
    se = p.sqrt_eps
    half = k + 0.5

    def n_deg(j: int) -> int:
        if j < 5:
            return 0
        if asymptotic:
            return p.degree(j)
        return g.cell(j).n if g.has_cell(j) else 0

    def star(j: int, r: float, a) -> int:
        if j < 5 or not g.has_cell(j):
            return 0
        return halfplane_count_exact(g, j, r, a)

    before = sum(n_deg(j) for j in range(5, k - 1))
    if asymptotic:
        return RatioCounts(before, n_deg(k - 1), n_deg(k), model.fraction_pole * n_deg(k + 1),
                           before + n_deg(k - 1), model.fraction_zero * n_deg(k),
                           model.fraction_pole * n_deg(k + 1), 0.0)
    if interval == "I1":
        lower = star(k - 1, half, INFINITY)
        upper = star(k + 1, half, INFINITY)
        return RatioCounts(before, lower, n_deg(k), upper, before + lower, star(k, half, 0), upper, 0.0)
    r_minus = half - 3.0 * se
    r_prime = half + 1.5 * se
    return RatioCounts(
        before, star(k - 1, r_minus, INFINITY), n_deg(k), star(k + 1, r_minus, INFINITY),
        before + n_deg(k - 1), star(k, r_prime, 0), star(k + 1, r_prime, INFINITY),
        star(k + 2, r_prime, 0),
    )


def predicted_ratio(fun: ToppilaFunction, k: int, interval: str = "I1", asymptotic: bool = False,
                    model: RatioModel = RatioModel()) -> float:
    return prediction_counts(fun, k, interval, asymptotic, model).value()


def interval_tag(r: float, fun: ToppilaFunction) -> tuple[int | None, str]:
    """(governing k, 'I1' | 'I2' | 'other') for radius r.

    k is the cell with r in [k - 1/2 + 1.5 sqrt(eps), k + 1/2 + 1.5 sqrt(eps)),
    the union of its first and second intervals.
    """
    h = 1.5 * fun.params.sqrt_eps
    k = math.floor(r + 0.5 - h)
    if not (5 <= k <= fun.params.k_max):
        return None, "other"
    return k, ("I1" if r <= k + 0.5 - h else "I2")


@dataclass(frozen=True)
class SweepRow:
    r: float
    interval: str
    k: int | None
    n_r: int
    attain: ExtComplex
    A_quad: float
    A_quad_err: float
    A_mc: float
    A_mc_err: float
    ratio: float
    predicted: float
    status: str = "ok"

    def csv_row(self) -> dict:
        inf = self.attain is INFINITY
        return dict(
            r=self.r, interval=self.interval, n_r=self.n_r,
            attain_re=0.0 if inf else self.attain.real, attain_im=0.0 if inf else self.attain.imag,
            attain_is_inf=int(inf), A_quad=self.A_quad, A_quad_err=self.A_quad_err,
            A_mc=self.A_mc, A_mc_err=self.A_mc_err, ratio=self.ratio, predicted=self.predicted,
        )


# rows with A below this have no meaningful ratio (f is essentially constant on the disk)
MIN_AREA = 1e-3


def sweep_row(fun: ToppilaFunction, r: float, seed: int = 0, probe_grid_size: int = 64,
              mc_samples: int = 200, quad_tol: float | None = None) -> SweepRow:
    k, tag = interval_tag(r, fun)
    n_r, attain = max_valence(fun, r, probe_grid_size)
    quad: AreaResult = area_quadrature(fun, r, quad_tol)
    mc: AreaResult = area_counting_oracle(fun, r, mc_samples, seed)
    predicted = predicted_ratio(fun, k, tag) if k is not None else math.nan
    if quad.value < MIN_AREA:
        return SweepRow(r, tag, k, n_r, attain, quad.value, quad.error_estimate, mc.value,
                        mc.error_estimate, math.nan, predicted, "ratio-undefined")
    return SweepRow(r, tag, k, n_r, attain, quad.value, quad.error_estimate, mc.value,
                    mc.error_estimate, n_r / quad.value, predicted)


def sweep(fun: ToppilaFunction, r_min: float, r_max: float, steps: int, seed: int = 0,
          probe_grid_size: int = 64, mc_samples: int = 200, quad_tol: float | None = None) -> list[SweepRow]:
    """Measured n(r)/A(r, f) against the finite-k prediction on an even r-grid.

    A row that raises is kept with status 'error: ...' and NaN values.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if not r_min < r_max:
        raise ValueError("need r_min < r_max")
    rows = []
    for i in range(steps):
        r = r_min + (r_max - r_min) * i / (steps - 1)
        r = float(f"{r:.12g}")  # keep grid values free of accumulated rounding
        try:
            rows.append(sweep_row(fun, r, seed + i, probe_grid_size, mc_samples, quad_tol))
        except (ArithmeticError, ValueError) as err:
            k, tag = interval_tag(r, fun)
            nan = math.nan
            rows.append(SweepRow(r, tag, k, -1, INFINITY, nan, nan, nan, nan, nan, nan,
                                 f"error: {type(err).__name__}: {err}"))
    return rows
