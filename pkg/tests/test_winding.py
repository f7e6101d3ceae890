import cmath
import math

import mpmath
import numpy as np
import pytest

from valence_forge.moebius import T_MAP, inverse
from valence_forge.sphere import INFINITY
from valence_forge.winding import (
    Arc, CellGeometry, Contour, count_in_cell, count_in_cell_many, count_in_disk, count_in_disk_many,
    halfplane_count_exact, jitter_radii, max_valence, winding_number,
)


def _s_points(cell, a: complex) -> np.ndarray:
    """All solutions of S_k(z) = a: T_k(z) = (1 - a)^(-1/N) e^{2 pi i j / N}."""
    n = cell.n
    base = cmath.exp(-cmath.log(1 - a) / n)
    w = base * np.exp(2j * np.pi * np.arange(n) / n)
    return cell.from_local(inverse(T_MAP).apply_array(w))


@pytest.mark.parametrize("r", [4.0, 4.3, 5.0, 5.2, 6.0])
@pytest.mark.parametrize("a", [2j, -1.0, 0.5 + 0.5j, 10.0])
def test_factor_count_against_explicit_solutions(fun, r, a):
    s5 = fun.factor(5)
    expected = int(np.count_nonzero(np.abs(_s_points(fun.cell(5), a)) <= r))
    assert count_in_disk(s5, r, a) == expected


@pytest.mark.parametrize("r", [4.0, 4.3, 5.0, 5.2, 6.0])
def test_winding_matches_enumeration_for_zeros(fun, r):
    s5 = fun.factor(5)
    assert count_in_disk(s5, r, 0, method="winding") == count_in_disk(s5, r, 0)


@pytest.mark.parametrize("r", [4.0, 4.3])
def test_winding_matches_enumeration_on_full_product(fun, r):
    assert count_in_disk(fun, r, 0, method="winding") == count_in_disk(fun, r, 0)
    assert count_in_disk(fun.reciprocal(), r, INFINITY, method="winding") == count_in_disk(fun, r, 0)


def test_no_points_in_small_disk(fun):
    assert [c.count for c in count_in_disk_many(fun, 3.0, [0, INFINITY, 2j, 1.001])] == [0, 0, 0, 0]


def _mp_f_minus_one(fun, z):
    """f - 1 expanded so that no term cancels against 1."""
    u = []
    for c in fun.cells:
        w = mpmath.mpf(2) / 3 * (z / mpmath.expj(c.alpha) - c.k)
        u.append(((w + mpmath.mpf(1) / 3) / (1 + w / 3)) ** (-c.n))
    u5, u6, u7, u8 = u
    return (-u5 - u7 + u5 * u7 + u6 + u8 - u6 * u8) / ((1 - u6) * (1 - u8))


@pytest.mark.slow
def test_one_points_where_f_is_flat(fun):
    # |f - 1| < 1e-20 on |z| <= 3, yet f = 1 has solutions there (T_5 has a pole at 0.5i)
    got = count_in_disk(fun, 3.0, 1)
    with mpmath.workdps(30):
        m = 12000
        args = np.array([float(mpmath.arg(_mp_f_minus_one(fun, 3 * mpmath.expj(2 * mpmath.pi * j / m))))
                         for j in range(m)])
    d = np.diff(np.r_[args, args[0]])
    d = (d + np.pi) % (2 * np.pi) - np.pi
    assert np.max(np.abs(d)) < 2.0
    assert got == round(d.sum() / (2 * np.pi)) == 736


def test_winding_of_circle_around_single_cell(fun):
    # around C_a^5 the factor S_5 - a has N_5 zeros and one pole of order N_5
    c = fun.cell(5)
    ca, ra = c.circle_a(fun.params.delta)
    res = winding_number(fun.factor(5), Contour.circle(ca, ra), 2j)
    assert res.winding == 0
    assert res.min_chordal_clearance > 0


def test_cell_counts_enclosed(fun):
    for k in (5, 6):
        got = count_in_cell_many(fun, k, 10.5, [1j, -1, 2j, 3])
        assert [g.count for g in got] == [fun.cell(k).n] * 4


def test_disk_count_is_sum_of_cell_counts(fun):
    r = 5.9
    targets = [2j, -1.0, 3.0]
    total = [c.count for c in count_in_disk_many(fun, r, targets)]
    parts = np.zeros(len(targets), dtype=int)
    for c in fun.cells:
        parts += [x.count for x in count_in_cell_many(fun, c.k, r, targets)]
    assert list(parts) == total


def test_cell_geometry_cases(fun):
    assert CellGeometry.of(fun, 5, 2.0).case() == "disjoint"
    assert CellGeometry.of(fun, 5, 10.0).case() == "enclosed"
    assert CellGeometry.of(fun, 5, 3.5).case() == "lens"
    assert CellGeometry.of(fun, 5, 5.0).case() == "gamma"
    assert CellGeometry.of(fun, 5, 6.5).case() == "lens-minus-b"
    assert count_in_cell(fun, 5, 2.0, 2j) == 0


def test_contour_pieces_must_join():
    a = Arc(0j, 1.0, 0.0, math.pi)
    b = Arc(0j, 2.0, math.pi, 2 * math.pi)
    with pytest.raises(ValueError):
        Contour((a, b))
    assert Contour.circle(0, 2).length == pytest.approx(4 * math.pi)


def test_jitter_radii():
    radii = list(jitter_radii(6.0, 4))
    assert radii[0] == 6.0
    assert len(radii) == 5
    assert all(6.0 < r < 6.0 + 1e-5 for r in radii[1:])


def test_halfplane_counts(fun):
    c = fun.cell(5)
    proj = (c.roots * np.conj(c.rotation)).real
    assert halfplane_count_exact(fun, 5, 5.5, 0) == np.count_nonzero(proj <= 5.5)
    assert halfplane_count_exact(fun, 5, 5.5, INFINITY) == 0
    assert halfplane_count_exact(fun, 6, 100.0, INFINITY) == fun.cell(6).n
    assert halfplane_count_exact(fun, 5, 3.0, 0) == 0
    counts = [halfplane_count_exact(fun, 7, r, 0) for r in np.linspace(5, 9, 30)]
    assert counts == sorted(counts)
    with pytest.raises(ValueError):
        halfplane_count_exact(fun, 5, 5.5, 1j)


def test_max_valence_small_radius(fun):
    n, a = max_valence(fun, 4.0, 16)
    probes = [0, INFINITY, 1] + [2j, -1.0, 5.0]
    assert n >= max(c.count for c in count_in_disk_many(fun, 4.0, probes))
    assert n == count_in_disk(fun, 4.0, a)
