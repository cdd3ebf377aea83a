import math

import numpy as np
import pytest

from frostman_lab._common import DomainError, WorkBudgetExceeded
from frostman_lab.constructions import (build_sharpness_instance, cantor_measure_on_curve, cantor_segments,
                                        clustered_instance, random_grid_measure,
                                        random_incidence_instance, random_katz_tao, sharpness_sweep)
from frostman_lab.curve import exp_curve, parabola
from frostman_lab.dyadic import CubeSet, minkowski_cover
from frostman_lab.measures import frostman_constant, katz_tao_constant, mollified_l2


@pytest.fixture(scope="module")
def inst12():
    return build_sharpness_instance(2.0**-12, 1.2, 0.3)


def test_sharpness_sets(inst12):
    d, a = inst12.delta, inst12.delta ** 0.4
    assert len(inst12.A_set) == math.floor(1 / a)
    assert np.all(np.abs(inst12.A_set * d - a * np.arange(1, len(inst12.A_set) + 1)) <= d / 2)
    # |D| is comparable to delta^-s
    n_d = len(inst12.D_set)
    assert d**-0.3 / 4 <= n_d <= 4 * d**-0.3
    assert inst12.t == pytest.approx(1.05)


@pytest.mark.xfail(strict=True, reason="each sum carries four to five delta-cells, so the unit-constant factor 8 "
                                       "is exceeded at this scale; see the decisions ledger")
def test_sharpness_sumset_factor8(inst12):
    r = inst12.diagnostics["ratios"]["A+A"]
    assert 1 / 8 <= r <= 8


def test_sharpness_sumset_near_factor8(inst12):
    # the measured ratio stays within a bounded factor of the prediction
    assert 1 / 8 <= inst12.diagnostics["ratios"]["A+A"] <= 16


def test_sharpness_sum_cover(inst12):
    assert inst12.diagnostics["covers"]["AxB+G(D)"] <= 100 * inst12.delta**-1.2


def test_sharpness_frostman(inst12):
    assert frostman_constant(inst12.sigma, 0.3) <= 1 + 1e-12
    for t in (0.5, 0.9, 1.1):
        assert frostman_constant(inst12.mu, t) <= frostman_constant(inst12.mu, 1.2) + 1e-12 <= 1 + 1e-9
    assert inst12.c1 >= 1 and inst12.c >= 1


def test_sharpness_cover_oracle():
    # exact interval covers against the brute cube-sum oracle at a small scale
    k = 8
    inst = build_sharpness_instance(2.0**-k, 1.2, 0.3)
    cov = inst.diagnostics["covers"]
    E = CubeSet(k, inst.mu.cells)
    F = CubeSet(k, inst.sigma.cells)
    brute = minkowski_cover(E, F, 2.0**-k, mode="cubes")
    assert cov["AxB"] == len(E)
    # the cube-sum oracle covers the closed Minkowski sum of the cubes, a superset of the open one
    assert cov["AxB+G(D)"] <= brute


def test_sharpness_domain():
    with pytest.raises(DomainError):
        build_sharpness_instance(2.0**-12, 0.8, 0.3)
    with pytest.raises(DomainError):
        build_sharpness_instance(2.0**-12, 1.2, 0.6)
    with pytest.raises(DomainError):
        build_sharpness_instance(2.0**-12, 1.2, 0.3, spec=exp_curve())


def test_l2_ceiling():
    # the support bound caps the growth exponent of the mollified L2 norm at tau
    xs, ys = [], []
    for k in range(8, 12):
        inst = build_sharpness_instance(2.0**-k, 1.2, 0.3)
        xs.append(-k)
        ys.append(math.log2(mollified_l2(inst.mu, inst.sigma)))
    slope = np.polyfit(xs, ys, 1)[0]
    assert 2 + slope <= 1.2 + 0.05


def test_sharpness_sweep_runs():
    rows, slope = sharpness_sweep([8, 9, 10], 1.2, 0.3)
    assert len(rows) == 3 and 0.8 < slope < 2


def test_cantor_segments():
    seg = cantor_segments(0.5, 3)
    assert len(seg) == 8
    assert seg[:, 1] - seg[:, 0] == pytest.approx(np.full(8, 4.0**-3))
    assert seg[0, 0] == 0 and seg[-1, 1] == 1


def test_cantor_half_frostman():
    C = cantor_measure_on_curve(parabola(), 0.5, 12)
    assert C.stage == 6
    assert C.frostman <= 4
    assert frostman_constant(C.grid, 0.5) <= 1 + 1e-12


def test_cantor_07_level14():
    C = cantor_measure_on_curve(parabola(), 0.7, 14)
    assert C.frostman <= 4
    assert frostman_constant(C.grid, 0.7) <= 1 + 1e-12


def test_cantor_near_one_is_length():
    C = cantor_measure_on_curve(parabola(), 0.99, 8)
    x = C.grid.cells[:, 0]
    cdf = np.array([C.grid.weights[x < m].sum() for m in range(0, 257, 8)])
    assert np.max(np.abs(cdf / C.grid.mass - np.arange(0, 257, 8) / 256)) <= 0.05


def test_random_katz_tao_examples():
    full = random_katz_tao(2.0**-5, 2.0, 1.0, seed=0)
    assert len(full) == 4**5
    one = random_katz_tao(2.0**-6, 0.0, 1.0, seed=0)
    assert len(one) == 1
    P = random_katz_tao(2.0**-10, 1.0, 4.0, seed=7)
    assert len(P) > 0 and katz_tao_constant(P, 1.0) <= 4
    with pytest.raises(WorkBudgetExceeded):
        random_katz_tao(2.0**-6, 1.0, 0.5, seed=0)


def test_reproducible():
    a = random_katz_tao(2.0**-9, 0.7, 2.0, seed=11)
    b = random_katz_tao(2.0**-9, 0.7, 2.0, seed=11)
    c = random_katz_tao(2.0**-9, 0.7, 2.0, seed=12)
    assert a == b and a != c
    i1 = random_incidence_instance(8, 0.5, 0.5, seed=3)
    i2 = random_incidence_instance(8, 0.5, 0.5, seed=3)
    assert i1.F == i2.F and i1.T.P == i2.T.P
    f1, t1 = clustered_instance(7, 0.5, 1.0, seed=2)
    f2, t2 = clustered_instance(7, 0.5, 1.0, seed=2)
    assert f1 == f2 and t1.P == t2.P
    assert np.array_equal(random_grid_measure(6, 4).weights, random_grid_measure(6, 4).weights)


def test_incidence_instance_constants():
    inst = random_incidence_instance(9, 0.5, 0.7, seed=1, A=2.0, B=3.0)
    assert katz_tao_constant(inst.T.P, 0.7) <= 2
    assert katz_tao_constant(inst.F, 0.5) <= 3
