import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from valence_forge.moebius import (
    IDENTITY, RECIPROCAL, T_MAP, GeneralizedCircle, MoebiusMap, apply, cell_composite, cell_map,
    circle_through, compose, image_of_circle, inverse, line_image_abscissa, t_boundary_argument,
)
from valence_forge.sphere import INFINITY

finite = st.complex_numbers(max_magnitude=100, allow_nan=False, allow_infinity=False)
coef = st.complex_numbers(min_magnitude=0.1, max_magnitude=10)


def test_t_fixed_structure():
    assert apply(T_MAP, -1 / 3) == 0
    assert apply(T_MAP, -3) is INFINITY
    assert apply(T_MAP, INFINITY) == pytest.approx(3.0)
    assert apply(T_MAP, 1) == pytest.approx(1.0)
    assert apply(T_MAP, -1) == pytest.approx(-1.0)


def test_t_preserves_unit_circle():
    th = np.linspace(0, 2 * np.pi, 101)
    assert np.allclose(np.abs(T_MAP.apply_array(np.exp(1j * th))), 1.0)


def test_degenerate_map_rejected():
    with pytest.raises(ValueError):
        MoebiusMap(1, 2, 2, 4)


@given(coef, coef, coef, coef, finite)
def test_inverse_roundtrip(a, b, c, d, z):
    try:
        m = MoebiusMap(a, b, c, d)
    except ValueError:
        return
    w = apply(m, z)
    if w is INFINITY or abs(w) > 1e8 or abs(m.det) < 1e-3:
        return
    assert apply(inverse(m), w) == pytest.approx(z, rel=1e-6, abs=1e-6)


@given(finite)
def test_compose_matches_sequential_application(z):
    m = compose(T_MAP, cell_map(6, math.pi))
    if abs(apply(cell_map(6, math.pi), z) + 3) < 1e-6:
        return
    assert apply(m, z) == pytest.approx(apply(T_MAP, apply(cell_map(6, math.pi), z)))
    assert (T_MAP @ IDENTITY) == T_MAP


def test_derivative_by_finite_difference():
    m = cell_composite(7, 3 * math.pi / 2)
    for z in (7j, -7.3j + 0.4, 1 + 1j):
        h = 1e-6
        fd = (apply(m, z + h) - apply(m, z - h)) / (2 * h)
        assert m.derivative(z) == pytest.approx(fd, rel=1e-7)


def test_cell_map_sends_cell_to_unit_disk():
    for k in (5, 6, 7, 8):
        alpha = (k % 4) * math.pi / 2
        L = cell_map(k, alpha)
        center = k * cmath.exp(1j * alpha)
        assert abs(apply(L, center)) < 1e-12
        for t in np.linspace(0, 2 * np.pi, 9):
            assert abs(apply(L, center + 1.5 * cmath.exp(1j * t))) == pytest.approx(1.0)
        # special point (k - 1/2) e^{i alpha} goes to -1/3 and T sends it to 0
        special = (k - 0.5) * cmath.exp(1j * alpha)
        assert abs(apply(cell_composite(k, alpha), special)) < 1e-12
    with pytest.raises(ValueError):
        cell_map(4, 0.0)


def test_line_image_abscissa_by_mapping_points():
    for k in (5, 6, 7):
        for j in (5, 6, 7, 8):
            alpha = (j % 4) * math.pi / 2
            rot = cmath.exp(1j * alpha)
            L = cell_map(j, alpha)
            pts = [(k + 0.5 + 1j * t) * rot for t in (-2.0, 0.0, 3.0)]
            for p in pts:
                assert apply(L, p).real == pytest.approx(line_image_abscissa(k, j))


def test_t_boundary_argument():
    x = np.array([-1.0, 0.0, 1.0])
    got = t_boundary_argument(x)
    assert got[0] == pytest.approx(math.pi)
    assert got[2] == pytest.approx(0.0)
    assert got[1] == pytest.approx(cmath.phase(apply(T_MAP, 1j)))


def test_circle_through():
    c = circle_through(1, 1j, -1)
    assert c.center == pytest.approx(0)
    assert c.radius == pytest.approx(1)
    line = circle_through(0, 1 + 1j, 2 + 2j)
    assert line.is_line
    assert line.contains_point(5 + 5j)
    assert line.contains_point(INFINITY)


@given(finite, st.floats(0.1, 10), coef, coef, coef, coef)
def test_image_of_circle_contains_mapped_points(center, radius, a, b, c, d):
    try:
        m = MoebiusMap(a, b, c, d)
    except ValueError:
        return
    circ = GeneralizedCircle.circle(center, radius)
    pole = m.pole
    if pole is not INFINITY and circ.distance(pole) < 1e-2:
        return
    try:
        img = image_of_circle(m, circ)
    except ArithmeticError:
        return
    for p in circ.points(8):
        w = apply(m, p)
        if w is INFINITY or abs(w) > 1e6:
            continue
        assert img.distance(w) <= 1e-6 * max(1.0, abs(w), img.radius or 1.0)


def test_image_through_pole_is_line():
    circ = GeneralizedCircle.circle(0, 1)
    img = image_of_circle(compose(RECIPROCAL, MoebiusMap(1, -1, 0, 1)), circ)
    # z -> 1/(z - 1) sends the unit circle to Re w = -1/2
    assert img.is_line
    assert img.contains_point(-0.5 + 3j)
