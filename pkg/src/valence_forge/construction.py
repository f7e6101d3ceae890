"""The product f = prod_{odd k} S_k / prod_{even k} S_k and its building blocks.

Each cell k >= 5 carries the disk D_k = B(k e^{i alpha_k}, 3/2), the map
T_k = T o L_k and the factor S_k = 1 - T_k^{-N_k} with N_k = floor(C^{k+k0}).
All powers T_k^{N_k} are handled as ``-N_k log T_k`` so that magnitudes far
outside the double range never materialise.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction

import numpy as np

from . import logspace
from .moebius import MoebiusMap, T_MAP, cell_map, inverse
from .sphere import INFINITY, ExtComplex, as_ext

ALPHA_RULES = ("mod4-quarter-turns", "mod5-fifth-turns")

# points this close to a located zero / pole are treated as the singular point itself
SNAP_TOL = 1e-12


class ParamsError(ValueError):
    """Construction parameters violate one or more required inequalities."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class DomainError(ValueError):
    """Evaluation requested outside the certified region."""


class SingularityError(ArithmeticError):
    """Quantity requested exactly at a zero or pole."""


@dataclass(frozen=True)
class Params:
    epsilon: float = 0.01
    delta: float = 0.01
    growth_c: float = 2.28228
    k0: int = 3
    k_max: int = 8
    quad_tol: float = 0.5
    winding_tol: float = 1e-9
    alpha_rule: str = "mod4-quarter-turns"

    @property
    def sqrt_eps(self) -> float:
        return math.sqrt(self.epsilon)

    def degree(self, k: int) -> int:
        """N_k = floor(C^{k + k0}), computed exactly from the decimal value of C."""
        return degree(self.growth_c, k + self.k0)

    def with_(self, **kw) -> "Params":
        return replace(self, **kw)


PARAM_FIELDS = tuple(f.name for f in fields(Params))


def degree(growth_c: float, power: int) -> int:
    return math.floor(Fraction(repr(float(growth_c))) ** power)


def alpha_for(k: int, rule: str) -> float:
    if rule == "mod4-quarter-turns":
        return (k % 4) * (math.pi / 2)
    if rule == "mod5-fifth-turns":
        return (k % 5) * (2 * math.pi / 5)
    raise ValueError(f"unknown alpha_rule {rule!r}; choose from {ALPHA_RULES}")


def _log_tail(p: Params, first: int) -> float:
    """log of an upper bound for sum_{k >= first} (1 + delta)^{-N_k}.

    Consecutive exponents grow by at least C^{first+k0}(C-1) - 1, so the terms
    are dominated by a geometric series.
    """
    log_step = math.log1p(p.delta)
    n_first = p.degree(first)
    gap = float(p.growth_c) ** (first + p.k0) * (p.growth_c - 1.0) - 1.0
    if gap <= 0:
        return math.inf
    log_q = -gap * log_step
    return -n_first * log_step - math.log(-math.expm1(log_q))


def constraint_values(p: Params) -> dict[str, tuple[float, float, bool]]:
    """Each required inequality as (lhs, rhs, holds) with lhs < rhs meaning 'holds'."""
    se = math.sqrt(p.epsilon)
    out: dict[str, tuple[float, float, bool]] = {}
    gap_lhs = (1 - 3 * p.delta) ** 2 - (1 - se) ** 2
    # circle-gap reads lhs > sqrt(eps); stored as (sqrt(eps), lhs) so that "lhs < rhs" holds
    out["circle-gap"] = (se, gap_lhs, gap_lhs > se)
    out["delta-small"] = (p.delta, se / 3, p.delta < se / 3)
    head = sum((1 + p.delta) ** (-p.degree(k)) for k in range(5, p.k_max + 1))
    total = head + math.exp(_log_tail(p, p.k_max + 1))
    out["tail-sum"] = (total, se / 6, total < se / 6)
    decay_lhs = (1 - p.delta) ** p.degree(5)
    out["inner-decay"] = (decay_lhs, se / 6, decay_lhs < se / 6)
    return out


def validate_params(p: Params) -> Params:
    """Return ``p`` unchanged if every construction inequality holds, else raise."""
    problems: list[str] = []
    if not (0 < p.epsilon < 1):
        problems.append(f"epsilon={p.epsilon} must lie in (0, 1)")
    if not (0 < p.delta < 1):
        problems.append(f"delta={p.delta} must lie in (0, 1)")
    if not p.growth_c > 1:
        problems.append(f"growth_c={p.growth_c} must exceed 1")
    if int(p.k0) != p.k0 or p.k0 < 1:
        problems.append(f"k0={p.k0} must be a positive integer")
    if int(p.k_max) != p.k_max or p.k_max < 6:
        problems.append(f"k_max={p.k_max} must be an integer >= 6")
    if not p.quad_tol > 0 or not p.winding_tol > 0:
        problems.append("tolerances must be positive")
    if p.alpha_rule not in ALPHA_RULES:
        problems.append(f"alpha_rule={p.alpha_rule!r} not in {ALPHA_RULES}")
    if problems:
        raise ParamsError(problems)
    if 2 * math.sqrt(p.epsilon) > 1 / math.sqrt(2):
        problems.append(f"epsilon={p.epsilon}: the disks around 0, 1, inf overlap")
    labels = {
        "circle-gap": "(1-3delta)^2 - (1-sqrt(eps))^2 = {rhs:.6g} must exceed sqrt(eps) = {lhs:.6g}",
        "delta-small": "delta = {lhs:.6g} must be < sqrt(eps)/3 = {rhs:.6g}",
        "tail-sum": "sum_k (1+delta)^(-N_k) = {lhs:.6g} must be < sqrt(eps)/6 = {rhs:.6g}",
        "inner-decay": "(1-delta)^N_5 = {lhs:.6g} must be < sqrt(eps)/6 = {rhs:.6g}",
    }
    for key, (lhs, rhs, ok) in constraint_values(p).items():
        if not ok:
            problems.append(f"{key} violated: " + labels[key].format(lhs=lhs, rhs=rhs)
                            + f" (short by {abs(rhs - lhs):.3g})")
    if problems:
        raise ParamsError(problems)
    return p


def truncation_tail_bound(p: Params) -> float:
    """Bound on |log f - log f_K| on the region outside every omitted cell."""
    return 2.0 * math.exp(_log_tail(p, p.k_max + 1))


@dataclass(frozen=True, eq=False)
class Cell:
    k: int
    alpha: float
    n: int
    roots: np.ndarray = field(repr=False)

    @property
    def parity(self) -> str:
        return "odd" if self.k % 2 else "even"

    @property
    def rotation(self) -> complex:
        return cmath.exp(1j * self.alpha)

    @property
    def center(self) -> complex:
        return self.k * self.rotation

    @property
    def special_point(self) -> complex:
        return (self.k - 0.5) * self.rotation

    @property
    def L(self) -> MoebiusMap:
        return cell_map(self.k, self.alpha)

    def to_local(self, z):
        """L_k(z) for arrays."""
        return (2.0 / 3.0) * (np.conj(self.rotation) * np.asarray(z) - self.k)

    def from_local(self, w):
        return self.rotation * (self.k + 1.5 * np.asarray(w))

    def log_T(self, z) -> np.ndarray:
        """log T_k(z) for arrays, on the principal branch of T_k itself.

        Only e^{-N log T} is ever used, so the branch is immaterial.
        """
        w = self.to_local(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log((3.0 * w + 1.0) / (3.0 + w))

    def dlog_T(self, z) -> np.ndarray:
        """T_k'/T_k at z."""
        w = self.to_local(z)
        lk = (2.0 / 3.0) * np.conj(self.rotation)
        with np.errstate(divide="ignore", invalid="ignore"):
            return lk * (1.0 / (w + 1.0 / 3.0) - (1.0 / 3.0) / (1.0 + w / 3.0))

    def local_circle(self, radius: float) -> tuple[complex, float]:
        """Centre and radius (in z) of T_k^{-1}(S(0, radius))."""
        tinv = inverse(T_MAP)
        p, q = tinv(radius), tinv(-radius)
        c_w, r_w = (p + q) / 2, abs(p - q) / 2
        return complex(self.from_local(c_w)), 1.5 * r_w

    def circle_a(self, delta: float) -> tuple[complex, float]:
        """C_a^k: T_k(C_a^k) = S(0, 1 + delta)."""
        return self.local_circle(1.0 + delta)

    def circle_b(self, delta: float) -> tuple[complex, float]:
        """C_b^k: T_k(C_b^k) = S(0, 1 - delta)."""
        return self.local_circle(1.0 - delta)


def locate_zeros_poles(k: int, alpha: float, n: int) -> tuple[np.ndarray, complex]:
    """Boundary roots L_k^{-1}(T^{-1}(e^{2 pi i j / N_k})) and the special point."""
    zeta = np.exp(2j * np.pi * np.arange(n) / n)
    w = inverse(T_MAP).apply_array(zeta)
    rot = cmath.exp(1j * alpha)
    roots = rot * (k + 1.5 * w)
    return roots, (k - 0.5) * rot


def build_cells(p: Params) -> list[Cell]:
    cells = []
    for k in range(5, p.k_max + 1):
        alpha = alpha_for(k, p.alpha_rule)
        n = p.degree(k)
        roots, _ = locate_zeros_poles(k, alpha, n)
        cells.append(Cell(k=k, alpha=alpha, n=n, roots=roots))
    for i, ci in enumerate(cells):
        for cj in cells[i + 1:]:
            if abs(ci.center - cj.center) < 4.0 - 1e-12:
                raise ParamsError([
                    f"cells {ci.k} and {cj.k}: centre distance {abs(ci.center - cj.center):.6g} < 4 "
                    "(disk gap below 1)"
                ])
    return cells


class ToppilaFunction:
    """Finite product prod_k S_k^{sign_k} over built cells.

    The default object is f truncated at k_max (odd cells in the numerator,
    even cells in the denominator).  ``factor(k)`` and ``reciprocal()`` give
    S_k alone and 1/f with the same evaluation machinery.
    """

    def __init__(self, params: Params, cells: list[Cell] | None = None,
                 signs: tuple[int, ...] | None = None, label: str = "f"):
        self.params = params
        self.cells = tuple(cells if cells is not None else build_cells(params))
        if signs is None:
            signs = tuple(1 if c.k % 2 else -1 for c in self.cells)
        self.signs = tuple(int(s) for s in signs)
        self.label = label
        self._sign_arr = np.array(self.signs, dtype=float)

    @classmethod
    def build(cls, params: Params | None = None) -> "ToppilaFunction":
        params = validate_params(params or Params())
        return cls(params)

    def __repr__(self) -> str:
        return f"ToppilaFunction({self.label}, cells={[c.k for c in self.cells]})"

    # --- derived objects -------------------------------------------------
    def cell(self, k: int) -> Cell:
        for c in self.cells:
            if c.k == k:
                return c
        raise KeyError(f"cell {k} not built (k_max={self.params.k_max})")

    def has_cell(self, k: int) -> bool:
        return any(c.k == k for c in self.cells)

    def sign(self, k: int) -> int:
        for c, s in zip(self.cells, self.signs):
            if c.k == k:
                return s
        return 0

    def factor(self, k: int) -> "ToppilaFunction":
        return ToppilaFunction(self.params, [self.cell(k)], (1,), label=f"S_{k}")

    def reciprocal(self) -> "ToppilaFunction":
        label = self.label[2:-1] if self.label.startswith("1/(") else f"1/({self.label})"
        return ToppilaFunction(self.params, list(self.cells), tuple(-s for s in self.signs), label)

    @property
    def eval_radius(self) -> float:
        return self.params.k_max + 3.0

    @property
    def faithful_radius(self) -> float:
        """Below this radius no omitted cell (k > k_max) meets the disk."""
        return self.params.k_max + 1 - 1.5 - 4.5 * self.params.delta

    # --- zero / pole bookkeeping ----------------------------------------
    def zeros_poles(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(zero locations, zero multiplicities, pole locations, pole multiplicities)."""
        zl, zm, pl, pm = [], [], [], []
        for c, s in zip(self.cells, self.signs):
            ones = np.ones(c.n, dtype=np.int64)
            sp = np.array([c.special_point])
            mult = np.array([c.n], dtype=np.int64)
            if s > 0:
                zl.append(c.roots); zm.append(ones); pl.append(sp); pm.append(mult)
            else:
                pl.append(c.roots); pm.append(ones); zl.append(sp); zm.append(mult)
        cat = np.concatenate
        return cat(zl), cat(zm), cat(pl), cat(pm)

    def count_points(self, which: str, mask_fn) -> int:
        """Sum of multiplicities of zeros ('zero') or poles ('pole') selected by mask_fn."""
        zl, zm, pl, pm = self.zeros_poles()
        loc, mult = (zl, zm) if which == "zero" else (pl, pm)
        return int(mult[mask_fn(loc)].sum())

    # --- evaluation core ------------------------------------------------
    def _check_domain(self, z: np.ndarray) -> None:
        if np.any(~np.isfinite(z)):
            raise DomainError("evaluation needs finite z")
        if np.any(np.abs(z) > self.eval_radius):
            raise DomainError(
                f"|z| > {self.eval_radius:g}: outside the region where the truncated product is used"
            )

    def _snap(self, z: np.ndarray) -> np.ndarray:
        """Per-factor snap code: 0 none, -1 at a boundary root, +1 at the special point."""
        out = np.zeros((len(self.cells),) + z.shape, dtype=np.int8)
        for i, c in enumerate(self.cells):
            near = np.abs(np.abs(z - c.center) - 1.5) < 1e-6
            if np.any(near):
                zn = z[near]
                ang = np.angle(T_MAP.apply_array(c.to_local(zn)))
                j = np.rint(ang * c.n / (2 * np.pi)).astype(np.int64) % c.n
                hit = np.abs(zn - c.roots[j]) <= SNAP_TOL
                sub = out[i][near]
                sub[hit] = -1
                out[i][near] = sub
            out[i][np.abs(z - c.special_point) <= SNAP_TOL] = 1
        return out

    def exponents(self, z) -> np.ndarray:
        """x_k = -N_k log T_k(z), shape (ncells, ...)."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(invalid="ignore"):  # log T_k = -inf at the special point
            return np.stack([-c.n * c.log_T(z) for c in self.cells])

    def log_factors(self, z, x: np.ndarray | None = None) -> np.ndarray:
        """log S_k(z) per cell with exact singular values at snapped points."""
        z = np.asarray(z, dtype=complex)
        if x is None:
            x = self.exponents(z)
        ls = logspace.log1m_exp(x)
        snap = self._snap(z)
        ls = np.where(snap == -1, logspace.LOG_ZERO, ls)
        ls = np.where(snap == 1, logspace.LOG_INF, ls)
        return ls

    def log_value(self, z, check: bool = True) -> np.ndarray:
        """log f(z) (complex, arbitrary branch); -inf / +inf real part at zeros / poles."""
        return self.log_state(z, check)[1]

    def log_state(self, z, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """(x, log f) with x_k = -N_k log T_k(z); the pair feeds :meth:`log_minus_from`."""
        z = np.asarray(z, dtype=complex)
        if check:
            self._check_domain(z)
        x = self.exponents(z)
        ls = self.log_factors(z, x)
        finite = ~np.isinf(ls.real)
        with np.errstate(invalid="ignore"):
            L = np.tensordot(self._sign_arr, np.where(finite, ls, 0.0), axes=1)
            sing = np.tensordot(self._sign_arr, np.where(finite, 0.0, np.sign(ls.real)), axes=1)
        L = np.where(sing > 0, logspace.LOG_INF, np.where(sing < 0, logspace.LOG_ZERO, L))
        return x, L

    def log_minus_from(self, x: np.ndarray, L: np.ndarray, a) -> tuple[np.ndarray, np.ndarray]:
        """(log(f - a), log resolution) from a cached :meth:`log_state`.

        The resolution is the log chordal distance from f to a, except where
        f - 1 is formed as a log-domain sum (f within e^-0.5 of 1 and a within
        1e-8 of 1): there it is the log of the cancellation ratio of that sum,
        the quantity that limits how well f - a is known.
        """
        a = as_ext(a)
        lh = 0.5 * np.logaddexp(0.0, 2.0 * np.clip(L.real, -800, 800))  # log hypot(1, |f|)
        if a is INFINITY:
            return -L, -lh
        if a == 0:
            g = L
        else:
            g = logspace.logsub(L, complex(cmath.log(a)))
        res = g.real - lh - math.log(math.hypot(1.0, abs(a)))
        near_one = (np.abs(L) < 0.5) & np.isfinite(L.real)
        if a != 0 and np.any(near_one):
            xs = x[:, near_one]
            lls = logspace.loglog1m_exp(xs)
            logL = logspace.signed_logsumexp(lls, self._sign_arr)
            log_fm1 = logL + logspace.expm1_over(L[near_one])
            if abs(a - 1) <= 1e-8:
                g[near_one] = log_fm1 if a == 1 else logspace.logsub(log_fm1, complex(cmath.log(a - 1)))
                top = np.max(lls.real, axis=0)
                res[near_one] = logL.real - top
            else:
                g[near_one] = logspace.logsub(log_fm1, complex(cmath.log(a - 1)))
        return g, res

    def log_minus(self, z, a, check: bool = True) -> np.ndarray:
        """log(f(z) - a); for a = infinity this is log(1/f(z))."""
        x, L = self.log_state(z, check)
        return self.log_minus_from(x, L, a)[0]

    def value(self, z, check: bool = True) -> np.ndarray:
        """f(z) as complex array; overflow to complex(inf, 0), underflow to 0."""
        L = self.log_value(z, check)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            v = np.exp(np.clip(L.real, -800, 800)) * np.exp(1j * np.where(np.isfinite(L.imag), L.imag, 0.0))
        return np.where(np.isposinf(L.real) | (L.real > 709), complex(np.inf, 0.0), v)

    def _log_derivative_from(self, z: np.ndarray, x: np.ndarray) -> np.ndarray:
        total = np.zeros(z.shape, dtype=complex)
        for i, c in enumerate(self.cells):
            # T^N = e^{-x}: the term is N (T'/T) / (e^{-x} - 1)
            with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
                denom = np.expm1(-np.clip(x[i].real, -700, 700) - 1j * x[i].imag)
                term = c.n * c.dlog_T(z) / denom
            term = np.where(x[i].real < -700, 0.0, term)
            total = total + self.signs[i] * term
        return total

    def log_derivative(self, z, check: bool = True) -> np.ndarray:
        """f'/f = sum_k sign_k N_k T_k' / (T_k (T_k^{N_k} - 1))."""
        z = np.asarray(z, dtype=complex)
        if check:
            self._check_domain(z)
        if np.any(self._snap(z) != 0):
            raise SingularityError("log derivative requested at a zero or pole")
        total = self._log_derivative_from(z, self.exponents(z))
        if np.any(~np.isfinite(total)):
            raise SingularityError("log derivative not finite (zero or pole)")
        return total

    def spherical_derivative(self, z, check: bool = True) -> np.ndarray:
        """f#(z) = |f'| / (1 + |f|^2), including the limits at zeros and poles.

        A factor is skipped at points outside B(center_k, 5/2): there
        |T_k| >= T(5/3) = 9/7, so |S_k - 1| < e^-185 and it cannot change f#
        at double precision.
        """
        z = np.asarray(z, dtype=complex)
        if check:
            self._check_domain(z)
        lam = np.zeros(z.shape)
        dl = np.zeros(z.shape, dtype=complex)
        singular = np.zeros(z.shape, dtype=bool)
        snap_all = None
        for i, c in enumerate(self.cells):
            near = np.abs(z - c.center) < 2.5
            if not np.any(near):
                continue
            zn = z[near]
            with np.errstate(invalid="ignore"):
                x = -c.n * c.log_T(zn)
            ls = logspace.log1m_exp(x)
            with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
                denom = np.expm1(-np.clip(x.real, -700, 700) - 1j * x.imag)
                term = np.where(x.real < -700, 0.0, c.n * c.dlog_T(zn) / denom)
            lam[near] += self.signs[i] * np.where(np.isinf(ls.real), 0.0, ls.real)
            with np.errstate(invalid="ignore"):  # inf - inf at singular points, replaced below
                dl[near] += self.signs[i] * term
            singular[near] |= np.isinf(ls.real) | (np.abs(np.abs(zn - c.center) - 1.5) < 1e-6) \
                | (np.abs(zn - c.special_point) <= 1e-6)
        with np.errstate(invalid="ignore", over="ignore"):
            out = np.abs(dl) / (2.0 * np.cosh(np.clip(lam, -700, 700)))
        # |f'/f| overflows only next to a zero or pole, where f# is tiny or given by the limit
        out = np.where(np.isfinite(out), out, 0.0)
        if np.any(singular):
            zs = z[singular]
            snap = self._snap(zs)
            hit = np.any(snap != 0, axis=0)
            if np.any(hit):
                sub = out[singular]
                sub[hit] = self._singular_sharp(zs[hit], snap[:, hit])
                out[singular] = sub
        return out

    def _singular_sharp(self, z: np.ndarray, snap: np.ndarray) -> np.ndarray:
        """f# at snapped points: |S_k'| |g| (or its reciprocal) at simple roots, 0 at special points."""
        out = np.zeros(z.shape, dtype=float)
        for idx in range(z.size):
            col = snap[:, idx]
            i = int(np.nonzero(col)[0][0])
            if col[i] == 1:
                continue  # multiplicity N_k >= 2: f# vanishes
            c = self.cells[i]
            zz = z[idx:idx + 1]
            # S_k' at a root: N_k T_k'/T_k since T_k^{N_k} = 1
            ds = abs(c.n * c.dlog_T(zz)[0])
            others = [j for j in range(len(self.cells)) if j != i]
            if others:
                sub = ToppilaFunction(self.params, [self.cells[j] for j in others],
                                      tuple(self.signs[j] for j in others))
                lg = sub.log_value(zz, check=False)[0].real
            else:
                lg = 0.0
            # f = S^s g; at a simple root of S the spherical derivative is |S'| |g|^{s}
            out[idx] = ds * math.exp(self.signs[i] * lg)
        return out

    # --- scalar API -----------------------------------------------------
    def eval_S(self, k: int, z) -> ExtComplex:
        return self.factor(k).eval(z)[0]

    def eval(self, z) -> tuple[ExtComplex, float]:
        """(f(z), log|f(z)|) at one finite point."""
        z = as_ext(z)
        if z is INFINITY:
            raise DomainError("evaluation needs finite z")
        L = self.log_value(np.array([z]))[0]
        if np.isposinf(L.real) or L.real > 709:
            return INFINITY, float(L.real)
        if np.isneginf(L.real):
            return 0j, float("-inf")
        return complex(cmath.exp(L)), float(L.real)


def eval_S_k(cell: Cell, p: Params, z) -> ExtComplex:
    """S_k(z) = 1 - T_k(z)^{-N_k} at a finite point, infinity when it overflows."""
    return ToppilaFunction(p, [cell], (1,), label=f"S_{cell.k}").eval(z)[0]


def eval_f(fun: ToppilaFunction, z) -> tuple[ExtComplex, float]:
    return fun.eval(z)


def dump_zeros_poles(fun: ToppilaFunction) -> list[dict]:
    """Rows for the `construct` CSV: k,parity,N_k,alpha_k,type,re,im,multiplicity."""
    rows = []
    for c, s in zip(fun.cells, fun.signs):
        root_type = "zero" if s > 0 else "pole"
        rows.append(dict(k=c.k, parity=c.parity, N_k=c.n, alpha_k=c.alpha, type="special",
                         re=c.special_point.real, im=c.special_point.imag, multiplicity=c.n))
        for r in c.roots:
            rows.append(dict(k=c.k, parity=c.parity, N_k=c.n, alpha_k=c.alpha, type=root_type,
                             re=float(r.real), im=float(r.imag), multiplicity=1))
    return rows
