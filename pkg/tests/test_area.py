import cmath

import numpy as np
import pytest

from valence_forge.area import (
    AreaResult, _gauss, area_counting_oracle, area_quadrature, area_rows, band_integral, cell_area,
)
from valence_forge.moebius import T_MAP, inverse
from valence_forge.sphere import uniform_sphere_array


def _explicit_count(cell, a: complex, r: float) -> int:
    if np.isinf(a.real):
        return int(abs(cell.special_point) <= r) * cell.n
    base = cmath.exp(-cmath.log(1 - a) / cell.n)
    w = base * np.exp(2j * np.pi * np.arange(cell.n) / cell.n)
    z = cell.from_local(inverse(T_MAP).apply_array(w))
    return int(np.count_nonzero(np.abs(z) <= r))


def test_gauss_rule_exactness():
    x, w = _gauss(9)
    for deg in range(18):
        assert np.dot(w, x ** deg) == pytest.approx(1.0 / (deg + 1), rel=1e-13)


def test_result_rejects_negative():
    with pytest.raises(ValueError):
        AreaResult(-1.0, 0.0, "quadrature", 1)
    rows = area_rows(2.0, [AreaResult(1.0, 0.1, "counting", 100)])
    assert rows == [dict(r=2.0, method="counting", value=1.0, error=0.1, work_units=100)]


def test_single_factor_total_area_is_degree(fun):
    # a rational function of degree N covers the sphere N times
    v, e, _ = band_integral(fun.factor(5), 5, None, 0.05)
    assert abs(v - 736) <= max(e, 1e-3)


def test_area_vanishes_on_flat_disk(fun):
    res = area_quadrature(fun, 3.0)
    assert res.value < 1e-6
    assert res.error_estimate < 0.5


@pytest.mark.parametrize("r", [4.6, 5.3, 3.5, 6.5])  # 3.5 and 6.5 touch the cell circle
def test_single_factor_area_against_explicit_counts(fun, r):
    s5 = fun.factor(5)
    q = area_quadrature(s5, r, tol=0.05)
    pts = uniform_sphere_array(4000, seed=17)
    counts = np.array([_explicit_count(fun.cell(5), a, r) for a in pts], dtype=float)
    sigma = counts.std(ddof=1) / np.sqrt(counts.size)
    assert abs(q.value - counts.mean()) <= q.error_estimate + 3 * sigma


def test_counting_oracle_reproducible(fun):
    a = area_counting_oracle(fun.factor(5), 5.0, 100, seed=4)
    b = area_counting_oracle(fun.factor(5), 5.0, 100, seed=4)
    assert a == b
    assert a.method == "counting"
    with pytest.raises(ValueError):
        area_counting_oracle(fun, 5.0, 10)


def test_cell_area_enclosed_equals_degree_times_measure(fun):
    res = cell_area(fun, 5, 6.9, "X", samples=100, seed=1)
    assert res.value == pytest.approx(736 * 0.97)
    assert res.error_estimate == 0.0
    full = cell_area(fun, 5, 6.9, "full", samples=100, seed=1)
    assert full.value <= 736
    with pytest.raises(ValueError):
        cell_area(fun, 5, 6.9, "nowhere")


@pytest.mark.slow
def test_quadrature_against_counting_full_product(fun):
    r = 5.0
    q = area_quadrature(fun, r)
    m = area_counting_oracle(fun, r, 200, seed=0)
    assert abs(q.value - m.value) <= fun.params.quad_tol + m.error_estimate
