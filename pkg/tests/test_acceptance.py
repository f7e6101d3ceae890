"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a single PASS/FAIL line, printed in the terminal summary.
"""
import math
import os
import time

import mpmath
import pytest

from conftest import ACCEPTANCE_LINES
from valence_forge.analysis import RatioModel, optimize_C, predicted_ratio, ratio_objective, sweep
from valence_forge.area import area_counting_oracle, area_quadrature, cell_area
from valence_forge.cli import main
from valence_forge.verify import COUNT_PROBES, check_halfplane_fractions, failures, run_all, spherical_lengths
from valence_forge.winding import count_in_cell_many, halfplane_count_exact
from valence_forge.sphere import INFINITY


def record(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def test_criterion_1_constants():
    t0 = time.perf_counter()
    with mpmath.workdps(40):
        pole = 1 - mpmath.atan(2 * mpmath.sqrt(2)) / mpmath.pi
        zero = 1 - mpmath.atan(4 * mpmath.sqrt(2) / 7) / mpmath.pi
    elapsed = time.perf_counter() - t0
    ok = 0.60817 < pole < 0.60818 and 0.78365 < zero < 0.78366 and elapsed < 1.0
    record(1, ok, f"pole fraction {float(pole):.8f}, zero fraction {float(zero):.8f}, {elapsed:.3f}s")
    assert ok


def test_criterion_2_optimize():
    t0 = time.perf_counter()
    opt = optimize_C(RatioModel())
    elapsed = time.perf_counter() - t0
    ok = (abs(opt.C_star - 2.28228) <= 1e-4 and opt.value > 1.07329
          and abs(opt.C_star - opt.closed_form) <= 1e-6 and elapsed < 1.0)
    record(2, ok, f"C* {opt.C_star:.8f} (closed form {opt.closed_form:.8f}), value {opt.value:.8f}, "
                  f"{elapsed:.3f}s")
    assert ok


def test_criterion_3_cell_counts(fun):
    t0 = time.perf_counter()
    got = {}
    for k in (5, 6):
        # any radius past the outer circle encloses U_k
        ca, ra = fun.cell(k).circle_a(fun.params.delta)
        r = abs(ca) + ra + 0.05
        got[k] = [c.count for c in count_in_cell_many(fun, k, r, COUNT_PROBES, method="winding")]
    elapsed = time.perf_counter() - t0
    n5, n6 = math.floor(2.28228 ** 8), math.floor(2.28228 ** 9)
    ok = got[5] == [n5] * 5 and got[6] == [n6] * 5 and elapsed < 600
    record(3, ok, f"cell 5 counts {got[5]} (N={n5}), cell 6 counts {got[6]} (N={n6}), {elapsed:.1f}s")
    assert ok


def test_criterion_4_halfplane_fractions(fun):
    t0 = time.perf_counter()
    parts, ok = [], True
    for k in (5, 7):
        nk, nk1 = fun.cell(k).n, fun.cell(k + 1).n
        zero = halfplane_count_exact(fun, k, k + 0.5, 0) / nk
        pole = halfplane_count_exact(fun, k + 1, k + 0.5, INFINITY) / nk1
        ok &= zero <= 0.78366 + 2 / nk and pole <= 0.60818 + 2 / nk1
        parts.append(f"k={k}: zero {zero:.5f}, pole {pole:.5f}")
    ok &= not failures(check_halfplane_fractions(fun, (5, 7)))
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10
    record(4, ok, "; ".join(parts) + f", {elapsed:.2f}s")
    assert ok


def test_criterion_5_area_cross_validation(fun):
    t0 = time.perf_counter()
    tol = fun.params.quad_tol
    parts, ok = [], True
    for r in (3.0, 6.0, 7.6):
        q = area_quadrature(fun, r)
        m = area_counting_oracle(fun, r, 400, seed=0)
        sigma = m.error_estimate / 3.0  # the oracle reports 3 standard errors
        diff = abs(q.value - m.value)
        ok &= diff <= tol + 3 * sigma
        parts.append(f"r={r}: quad {q.value:.4f} mc {m.value:.4f} diff {diff:.4f} <= {tol + 3 * sigma:.4f}")
    # at r = 7.6 the annuli of cells 5 and 6 lie inside the disk
    measure = 1 - 3 * fun.params.epsilon
    complete = []
    for c in fun.cells:
        ca, ra = c.circle_a(fun.params.delta)
        if abs(ca) + ra <= 7.6:
            complete.append(c.k)
    areas = [cell_area(fun, k, 7.6, "X", samples=400, seed=0) for k in complete]
    target = sum(fun.cell(k).n for k in complete) * measure
    total = sum(a.value for a in areas)
    err = sum(a.error_estimate for a in areas)
    ok &= complete == [5, 6] and abs(total - target) <= max(err, 1e-9 * target)
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1800
    parts.append(f"A^X cells {complete} at r=7.6: {total:.6f} vs {target:.6f} (err {err:.3g})")
    record(5, ok, "; ".join(parts) + f", {elapsed:.0f}s")
    assert ok


def test_criterion_6_verify_suite(fun):
    t0 = time.perf_counter()
    reports = run_all(fun, seed=0)
    bad = failures(reports)
    negative = [r.check_id for r in reports if r.status == "pass" and r.margin < 0]
    lengths = spherical_lengths(fun, 5, 0.0)
    scale = fun.params.epsilon ** -0.25
    ok_len = lengths["gamma_prime"] <= 165 * scale and lengths["gamma3"] <= 36 * scale
    elapsed = time.perf_counter() - t0
    ok = not bad and not negative and ok_len and elapsed < 600
    record(6, ok, f"{len(reports)} checks, {len(bad)} failed; length(Gamma') {lengths['gamma_prime']:.4f} "
                  f"<= {165 * scale:.1f}, length(Gamma3) {lengths['gamma3']:.4f} <= {36 * scale:.1f}, "
                  f"{elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_criterion_7_ratio_sweep(fun):
    t0 = time.perf_counter()
    rows = sweep(fun, 5.6, 7.4, 19, seed=0, probe_grid_size=64, mc_samples=200)
    above_one = [row.r for row in rows if not row.ratio > 1.0]
    off = [(row.r, row.ratio, row.predicted) for row in rows
           if not abs(row.ratio / row.predicted - 1.0) <= 0.05]
    for row in rows:
        print(f"r={row.r:.1f} {row.interval} n={row.n_r} A={row.A_quad:.4f} ratio={row.ratio:.5f} "
              f"predicted={row.predicted:.5f} {row.status}")
    target = ratio_objective(RatioModel(), 2.28228)
    trend = [predicted_ratio(fun, k, asymptotic=True) for k in (5, 6, 7, 8)]
    gaps = [v - target for v in trend]
    monotone = all(g > 0 for g in gaps) and all(a > b for a, b in zip(gaps, gaps[1:]))
    elapsed = time.perf_counter() - t0
    ok = not above_one and not off and monotone and elapsed < 7200
    record(7, ok, f"{len(rows)} rows; ratio <= 1 at {above_one}; {len(off)} rows off prediction by >5% "
                  f"{[(r, round(a, 4), round(b, 4)) for r, a, b in off]}; asymptotic trend "
                  f"{[round(v, 5) for v in trend]} -> {target:.5f} monotone={monotone}; {elapsed:.0f}s")
    assert not above_one, f"ratio <= 1 at r = {above_one}"
    assert monotone, f"asymptotic trend not monotone: {trend}"
    assert not off, f"{len(off)} rows differ from prediction by more than 5%: {off}"


RUNS = [
    ["optimize-c"],
    ["construct"],
    ["verify"],
    ["eval"],
    ["count", "--r", "5.6", "--a", "0,0", "--a", "inf", "--a", "1,0", "--a", "2,1"],
    ["area", "--r", "4.2"],
    ["sweep", "--r-min", "2.5", "--r-max", "3.5", "--r-steps", "2"],
]


def test_criterion_8_determinism(tmp_path):
    mismatched, codes = [], []
    for argv in RUNS:
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / argv[0] / rep
            os.makedirs(out)
            codes.append(main(argv + ["--seed", "3", "--out", str(out)]))
            outs.append((out / f"{argv[0].replace('-', '_')}.csv").read_bytes())
        if outs[0] != outs[1]:
            mismatched.append(argv[0])
    ok = not mismatched and all(c == 0 for c in codes)
    record(8, ok, f"{len(RUNS)} subcommands run twice, byte-identical CSVs; mismatched {mismatched}, "
                  f"exit codes {sorted(set(codes))}")
    assert ok
