"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line; the lines are repeated in the
terminal summary.  The sharpness criterion does not hold at these scales and
is marked as an expected failure; the analysis is in the decisions ledger.
"""

import time

import numpy as np
import pytest

from conftest import record
from frostman_lab.cli import run
from frostman_lab.curve import CurvedTube, exp_curve, parabola
from frostman_lab.dyadic import CubeSet, brute_force_tube_cubes, cubes_on_tube
from frostman_lab.incidence import TubeFamily, brute_force_incidences, weighted_incidences
from frostman_lab.measures import WeightedCubeSet
from frostman_lab.spectral import sobolev_ratio_suite


def test_criterion_1_energy_identity():
    t0 = time.time()
    res = run("energy-xcheck", {"measures": ["gaussian", "two-cube"], "level": 10, "omegas": [0.5, 1.0, 1.5]})
    took = time.time() - t0
    ok = res.passed and res.max_ratio <= 0.1 and took < 60
    record(1, ok, f"max relative gap {res.max_ratio:.4f} (<= 0.1), {took:.1f}s")
    assert ok


def test_criterion_2_fourier_decay():
    t0 = time.time()
    res = run("fourier-decay", {"R_exponents": list(range(11)), "directions": 720})
    took = time.time() - t0
    ok = res.passed and res.max_ratio <= 4 and took < 300
    record(2, ok, f"profile max/min {res.max_ratio:.3f} (<= 4), {took:.1f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason="covering ratios exceed the unit-constant factor 8 and the slope is "
                                       "pre-asymptotic at desk scales")
def test_criterion_3_sharpness():
    res = run("sharpness", {"tau": 1.2, "s": 0.3, "levels": list(range(8, 15)), "factor": 8.0, "slope_tol": 0.1})
    slope = res.notes["slope"]
    ok = res.passed
    record(3, ok, f"sum-set slope {slope:.3f} (target 1.2 +- 0.1), worst covering ratio {res.max_ratio:.2f} (<= 8)")
    assert ok


def _sweep(number, bound, pairs):
    t0 = time.time()
    res = run("incidence-sweep", {"pairs": pairs, "levels": [8, 9, 10, 11, 12], "instances": 100,
                                  "bound": bound, "C_accept": 100, "max_slope": 0.05, "seed": number})
    slopes = res.notes["slopes"]
    verdicts = {r[10] for r in res.rows}
    n_per = {tuple(p): sum(1 for r in res.rows if (r[0], r[1]) == tuple(p)) for p in pairs}
    ok = res.passed and verdicts == {"pass"} and min(n_per.values()) >= 500
    sl = ", ".join(f"({k}) {v:.3f}" for k, v in slopes.items())
    record(number, ok, f"max ratio {res.max_ratio:.3f} (<= 100), slopes {sl} (<= 0.05), "
                       f"{len(res.rows)} instances, {time.time() - t0:.0f}s")
    return ok


def test_criterion_4_incidence_main():
    assert _sweep(4, "main", [[0.3, 0.5], [0.5, 0.7], [0.7, 1.1]])


def test_criterion_5_incidence_easy():
    assert _sweep(5, "easy", [[0.5, 0.3], [0.7, 0.5], [0.5, 0.5]])


def test_criterion_6_measure_incidence():
    res = run("measure-incidence", {"t": 1.5, "levels": [6, 7, 8, 9], "instances": 20, "C_accept": 100})
    slope = res.notes["slope"]
    ok = res.passed and res.max_ratio <= 100 and slope <= 0.05 and len(res.rows) >= 80
    record(6, ok, f"max ratio {res.max_ratio:.3f} (<= 100), slope {slope:.3f} (<= 0.05)")
    assert ok


def test_criterion_7_pockets():
    res = run("regularize", {"levels": [8, 9], "instances": 25, "s": 0.5, "B": 2.0, "c_max": 20})
    rows = np.array([[r[5], r[6], r[9]] for r in res.rows], dtype=float)
    c1, c2, cd = rows.max(axis=0)
    ok = res.passed and len(res.rows) >= 50 and max(c1, c2, cd) <= 20
    record(7, ok, f"{len(res.rows)} instances: c_P1 {c1:.2f}, c_P2 {c2:.2f}, dominance {cd:.2f} (all <= 20)")
    assert ok


def test_criterion_8_sobolev():
    t0 = time.time()
    reports, drift = sobolev_ratio_suite(parabola(), s_list=(-0.5, 0.0, 0.5), trials=50,
                                         grids=(512, 1024, 2048), variants=("R-tilde", "R"))
    bounded = all(np.all(np.isfinite(r.ratios)) for r in reports)
    worst = max(drift.values())
    tilde = max(v for (var, _), v in drift.items() if var == "R-tilde")
    mx = max(r.max_ratio for r in reports)
    ok = bounded and worst <= 0.2
    record(8, ok, f"max ratio {mx:.3f}, grid drift R-tilde {tilde:.4f}, both variants {worst:.4f} (<= 0.2), "
                  f"{time.time() - t0:.0f}s")
    assert ok


def test_criterion_9_l6():
    res = run("l6-decay", {"s": 0.7, "level": 12, "R_exponents": list(range(1, 9)), "slope_tol": 0.15,
                           "check_level": 7, "check_R": 8.0})
    slope, gap = res.notes["slope"], res.notes["crosscheck_gap"]
    ok = res.passed and abs(slope - 0.3) <= 0.15 and gap <= 0.05
    record(9, ok, f"slope {slope:.3f} (0.3 +- 0.15), triple-convolution cross-check gap {gap:.2e} (<= 0.05)")
    assert ok


def test_criterion_10_exhaustive_oracles():
    rng = np.random.default_rng(10)
    checked = mism = 0
    for k in range(2, 9):
        n = 1 << k
        for _ in range(6):
            nP = int(rng.integers(1, min(4 * n, 200)))
            nF = int(rng.integers(1, min(10**7 // nP, 2 * n * n)))
            P = CubeSet(k, rng.integers(0, n, (nP, 2)))
            F = CubeSet(k, rng.integers(-n // 2, 3 * n // 2, (nF, 2)))
            T = TubeFamily(P, spec=parabola() if rng.random() < 0.5 else exp_curve(),
                           w1=rng.integers(1, 4, len(P)))
            Fw = WeightedCubeSet(F, rng.integers(1, 4, len(F)))
            assert len(P) * len(F) <= 10**7
            mism += weighted_incidences(Fw, T) != brute_force_incidences(Fw, T)
            checked += 1
    tubes = 0
    for k in range(0, 9):
        d = 2.0**-k
        for spec in (parabola(), exp_curve()):
            for q in rng.uniform(-1, 1, (4, 2)):
                t = CurvedTube(tuple(q), d, spec)
                mism += cubes_on_tube(t, d) != brute_force_tube_cubes(t, d)
                tubes += 1
    ok = mism == 0
    record(10, ok, f"{checked} incidence instances and {tubes} tubes, {mism} mismatches")
    assert ok
