import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from valence_forge.construction import (
    DomainError, Params, ParamsError, SingularityError, ToppilaFunction, alpha_for, constraint_values,
    dump_zeros_poles, eval_S_k, truncation_tail_bound, validate_params,
)
from valence_forge.sphere import INFINITY

# floor(2.28228^(k+3)) for k = 5..8, frozen from a 50-digit mpmath evaluation
DEGREES = {5: 736, 6: 1680, 7: 3834, 8: 8751}


def _mp_f(z: complex, fun: ToppilaFunction) -> mpmath.mpc:
    """Direct high-precision product, independent of the log-domain code."""
    with mpmath.workdps(60):
        zz = mpmath.mpc(z.real, z.imag)
        out = mpmath.mpc(1)
        for c, s in zip(fun.cells, fun.signs):
            rot = mpmath.expj(c.alpha)
            w = mpmath.mpf(2) / 3 * (zz / rot - c.k)
            t = (w + mpmath.mpf(1) / 3) / (1 + w / 3)
            S = 1 - t ** (-c.n)
            out *= S if s > 0 else 1 / S
        return out


def test_degrees_against_mpmath():
    with mpmath.workdps(50):
        for k, n in DEGREES.items():
            assert int(mpmath.floor(mpmath.mpf("2.28228") ** (k + 3))) == n
    p = Params()
    assert {k: p.degree(k) for k in DEGREES} == DEGREES


def test_alpha_rules():
    assert [alpha_for(k, "mod4-quarter-turns") for k in (5, 6, 7, 8)] == pytest.approx(
        [math.pi / 2, math.pi, 3 * math.pi / 2, 0.0])
    assert alpha_for(6, "mod5-fifth-turns") == pytest.approx(2 * math.pi / 5)
    with pytest.raises(ValueError):
        alpha_for(5, "nope")


def test_default_params_valid():
    p = validate_params(Params())
    vals = constraint_values(p)
    assert set(vals) == {"circle-gap", "delta-small", "tail-sum", "inner-decay"}
    assert all(ok for _, _, ok in vals.values())


def test_circle_gap_violation_reported():
    with pytest.raises(ParamsError, match="circle-gap"):
        validate_params(Params(delta=0.02))


def test_delta_small_violation_reported():
    with pytest.raises(ParamsError, match="delta-small"):
        validate_params(Params(epsilon=0.01, delta=0.034))


@pytest.mark.parametrize("kw", [dict(epsilon=0.0), dict(delta=1.5), dict(growth_c=0.9), dict(k_max=5),
                                dict(alpha_rule="x"), dict(quad_tol=-1.0), dict(epsilon=0.2)])
def test_bad_params_rejected(kw):
    with pytest.raises(ParamsError):
        validate_params(Params(**kw))


def test_truncation_tail_bound_small_and_decreasing():
    b8 = truncation_tail_bound(Params())
    b9 = truncation_tail_bound(Params(k_max=9))
    assert 0 < b8 < 1e-80
    assert b9 < b8


def test_cells_and_roots(fun):
    assert [c.k for c in fun.cells] == [5, 6, 7, 8]
    assert fun.signs == (1, -1, 1, -1)
    for c in fun.cells:
        assert c.n == DEGREES[c.k]
        assert len(c.roots) == c.n
        assert np.allclose(np.abs(c.roots - c.center), 1.5)
        # the root with T_k = 1 sits at L_k^{-1}(1) = (k + 3/2) e^{i alpha}
        assert np.min(np.abs(c.roots - (c.k + 1.5) * c.rotation)) < 1e-12
        assert abs(c.special_point) == pytest.approx(c.k - 0.5)
        lt = c.log_T(c.roots)
        assert np.allclose(np.exp(-c.n * lt), 1.0, atol=1e-8)


def test_cell_circles_bracket_boundary(fun):
    d = fun.params.delta
    for c in fun.cells:
        ca, ra = c.circle_a(d)
        cb, rb = c.circle_b(d)
        for center, rad, modulus in ((ca, ra, 1 + d), (cb, rb, 1 - d)):
            pts = center + rad * np.exp(1j * np.linspace(0, 2 * np.pi, 17))
            assert np.allclose(np.abs(np.exp(c.log_T(pts))), modulus)


def test_special_values(fun):
    c5, c6 = fun.cell(5), fun.cell(6)
    assert fun.eval(c5.special_point)[0] is INFINITY
    assert fun.eval(c6.special_point)[0] == 0
    assert fun.eval(c5.roots[3])[0] == 0
    assert fun.eval(c6.roots[10])[0] is INFINITY
    assert abs(fun.eval(0)[0] - 1) < fun.params.sqrt_eps / 2


def test_zero_pole_balance(fun):
    zl, zm, pl, pm = fun.zeros_poles()
    assert zm.sum() == pm.sum() == sum(DEGREES.values())
    rows = dump_zeros_poles(fun)
    assert len(rows) == sum(DEGREES.values()) + 4
    assert sum(r["multiplicity"] for r in rows if r["type"] == "special") == sum(DEGREES.values())


def _points_near_cells(seed: int, count: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    fun = ToppilaFunction.build()
    out = []
    for _ in range(count):
        c = fun.cells[rng.integers(4)]
        rad = rng.uniform(1.2, 1.8)
        out.append(c.center + rad * cmath.exp(1j * rng.uniform(0, 2 * np.pi)))
    return np.array(out)


def test_values_against_high_precision_product(fun):
    z = _points_near_cells(1, 40)
    L = fun.log_value(z)
    for zi, li in zip(z, L):
        ref = _mp_f(complex(zi), fun)
        assert li.real == pytest.approx(float(mpmath.log(abs(ref))), abs=1e-9)
        if abs(ref) > 1e-200:
            d = li.imag - float(mpmath.arg(ref))
            assert abs((d + math.pi) % (2 * math.pi) - math.pi) < 1e-7


def test_reciprocal_and_factor(fun):
    z = _points_near_cells(2, 20)
    assert np.allclose(fun.reciprocal().log_value(z).real, -fun.log_value(z).real)
    total = sum(s * fun.factor(c.k).log_value(z).real for c, s in zip(fun.cells, fun.signs))
    assert np.allclose(total, fun.log_value(z).real, atol=1e-9)
    c5 = fun.cell(5)
    w = eval_S_k(c5, fun.params, c5.center + 1.6)
    assert isinstance(w, complex)


def test_log_derivative_by_finite_difference(fun):
    z = _points_near_cells(3, 30)
    h = 1e-7
    d = fun.log_derivative(z)
    fd = (fun.log_value(z + h) - fun.log_value(z - h)) / (2 * h)
    # unwrap the argument jump
    fd = fd.real + 1j * (((fd.imag * 2 * h) + np.pi) % (2 * np.pi) - np.pi) / (2 * h)
    err = np.abs(d - fd) / np.maximum(1.0, np.abs(d))
    assert np.max(err) < 1e-4


def test_spherical_derivative_matches_definition(fun):
    z = _points_near_cells(4, 30)
    v = fun.value(z)
    ok = np.isfinite(v) & (np.abs(v) < 1e100) & (np.abs(v) > 1e-100)
    fs = fun.spherical_derivative(z)
    direct = np.abs(fun.log_derivative(z[ok]) * v[ok]) / (1 + np.abs(v[ok]) ** 2)
    assert np.allclose(fs[ok], direct, rtol=1e-8, atol=1e-300)


@given(st.floats(0, 2 * math.pi), st.floats(0, 10.5))
@settings(max_examples=100, deadline=None)
def test_spherical_derivative_reciprocal_invariant(theta, rad):
    fun = ToppilaFunction.build()
    z = np.array([rad * cmath.exp(1j * theta)])
    a = fun.spherical_derivative(z)[0]
    b = fun.reciprocal().spherical_derivative(z)[0]
    assert a == pytest.approx(b, rel=1e-9, abs=1e-300)


def test_spherical_derivative_at_simple_zero(fun):
    # |f(z0 + h)| / h -> |f'(z0)| = f#(z0) at a simple zero
    c = fun.cell(5)
    z0 = c.roots[100]
    h = 1e-8
    direction = (z0 - c.center) / abs(z0 - c.center)
    fd = abs(fun.value(np.array([z0 + h * direction]))[0]) / h
    assert fun.spherical_derivative(np.array([z0]))[0] == pytest.approx(fd, rel=1e-5)


def test_spherical_derivative_vanishes_at_special_points(fun):
    z = np.array([c.special_point for c in fun.cells])
    assert np.all(fun.spherical_derivative(z) == 0)


def test_log_derivative_refuses_singular_points(fun):
    with pytest.raises(SingularityError):
        fun.log_derivative(np.array([fun.cell(5).roots[0]]))


def test_domain_limit(fun):
    with pytest.raises(DomainError):
        fun.log_value(np.array([12.0 + 0j]))
    with pytest.raises(DomainError):
        fun.eval(INFINITY)


def test_far_field_is_close_to_one(fun):
    z = np.array([0.0, 1.0 + 1.0j, 3.0, -2.0j])
    assert np.all(np.abs(fun.value(z) - 1) < 1e-20)
