import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from frostman_lab._common import DomainError
from frostman_lab.constructions import build_sharpness_instance
from frostman_lab.dyadic import CubeSet, grid_cells
from frostman_lab.measures import (DeltaMeasure, WeightedCubeSet, f_known, frostman_constant, gamma,
                                   gaussian_energy, katz_tao_constant, mollified_l2, normalize_mass,
                                   riesz_constant, riesz_energy_fourier, riesz_energy_spatial, uniform_measure,
                                   zeta)

cells_st = st.lists(st.tuples(st.integers(0, 63), st.integers(0, 63)), min_size=1, max_size=40)


def two_cube():
    return DeltaMeasure(4, [[0, 0], [4, 0]], [0.5, 0.5])


def gaussian_measure(level, sd=0.1):
    n = 1 << level
    c = (np.arange(n) + 0.5) / n - 0.5
    g = np.exp(-(c[:, None] ** 2 + c[None, :] ** 2) / (2 * sd * sd))
    r = np.arange(n)
    cells = np.stack(np.meshgrid(r, r, indexing="ij"), -1).reshape(-1, 2)
    return normalize_mass(level, cells, g.ravel())


def test_mass_cap():
    with pytest.raises(DomainError):
        DeltaMeasure(3, [[0, 0], [1, 1]], [0.7, 0.7])
    m = normalize_mass(3, [[0, 0], [1, 1]], [3.0, 1.0])
    assert m.mass == pytest.approx(1.0)
    with pytest.raises(DomainError):
        DeltaMeasure(3, [[0, 0]], [-0.1])


def test_duplicates_merge():
    m = DeltaMeasure(3, [[1, 1], [1, 1], [2, 0]], [0.25, 0.25, 0.0])
    assert len(m) == 1 and m.weights[0] == 0.5


def test_frostman_examples():
    assert frostman_constant(uniform_measure(6), 2) == pytest.approx(1.0)
    assert frostman_constant(DeltaMeasure(7, [[5, 9]], [1.0]), 0) == 1.0


def test_frostman_sharpness_bounded():
    inst = build_sharpness_instance(2.0**-12, 1.2, 0.3)
    assert frostman_constant(inst.mu, 1.2) <= 2.0


def test_katz_tao_examples():
    assert katz_tao_constant(CubeSet(8, [(3, 4)]), 0.7) == 1.0
    assert katz_tao_constant(CubeSet(5, grid_cells(5)), 2) == pytest.approx(1.0)
    base = CubeSet(6, [(i, (7 * i) % 64) for i in range(64)])
    c = katz_tao_constant(base, 1)
    assert katz_tao_constant(WeightedCubeSet(base, np.full(64, 3)), 1) == pytest.approx(3 * c)


def test_energy_examples():
    assert riesz_energy_spatial(two_cube(), 1.0) == pytest.approx(3.0)
    assert riesz_energy_spatial(DeltaMeasure(5, [[2, 2]], [1.0]), 1.0) == 1.0
    with pytest.raises(DomainError):
        riesz_energy_spatial(two_cube(), 2.0)


def test_uniform_energy_matches_continuum():
    # closed form of the double integral of 1/|x - y| over the unit square
    exact = 4 * math.log(1 + math.sqrt(2)) - 4 * (math.sqrt(2) - 1) / 3
    assert riesz_energy_spatial(uniform_measure(8), 1.0) - 1 == pytest.approx(exact, rel=0.05)


def test_direct_and_fft_agree():
    m = gaussian_measure(5)
    a = riesz_energy_spatial(m, 0.7, method="direct")
    b = riesz_energy_spatial(m, 0.7, method="fft")
    assert a == pytest.approx(b, rel=1e-10)


def test_riesz_constant_gaussian():
    # c(omega) * int |g^|^2 |xi|^(omega-2) for a Gaussian, by radial quadrature
    sd, om = 0.3, 1.0
    rad, _ = integrate.quad(lambda r: 2 * math.pi * r * math.exp(-4 * math.pi**2 * sd * sd * r * r) * r ** (om - 2),
                            0, np.inf)
    assert riesz_constant(om) * rad == pytest.approx(gaussian_energy(sd, om), rel=1e-8)


def test_fourier_two_cube():
    assert riesz_energy_fourier(two_cube(), 1.0) == pytest.approx(3.0, rel=0.1)


@pytest.mark.parametrize("om", [0.5, 1.0, 1.5])
def test_fourier_spatial_smooth(om):
    m = gaussian_measure(7)
    assert riesz_energy_fourier(m, om) == pytest.approx(riesz_energy_spatial(m, om), rel=0.1)


def test_fourier_dilation():
    # same weights at half the spacing: off-diagonal part scales by 2^omega
    m = gaussian_measure(6, sd=0.15)
    fine = DeltaMeasure(7, m.cells, m.weights)
    om = 1.0
    a = riesz_energy_fourier(m, om) - 1
    b = riesz_energy_fourier(fine, om) - 1
    assert b / a == pytest.approx(2**om, rel=0.02)


def test_energy_monotone_in_omega():
    m = gaussian_measure(5)
    vals = [riesz_energy_spatial(m, om) for om in (0.3, 0.8, 1.3, 1.8)]
    # all distances are < 1, so larger omega gives larger energy
    assert vals == sorted(vals)


def test_mollified_point_mass():
    k = 6
    unit = DeltaMeasure(k, [[0, 0]], [1.0])
    c, _ = integrate.quad(lambda r: 2 * math.pi * r * math.exp(-1 / (1 - r * r)), 0, 1)
    eta2, _ = integrate.quad(lambda r: 2 * math.pi * r * math.exp(-2 / (1 - r * r)), 0, 1)
    want = 2.0 ** (2 * k) * eta2 / c**2
    assert mollified_l2(unit, unit) == pytest.approx(want, rel=1e-3)


def test_mollified_bounded_for_l2_density():
    vals = []
    for k in (4, 5, 6):
        point = DeltaMeasure(k, [[0, 0]], [1.0])
        vals.append(mollified_l2(uniform_measure(k), point))
    assert max(vals) < 2 and min(vals) > 0.5


def test_mollified_sharpness_slope():
    xs, ys = [], []
    for k in range(8, 13):
        inst = build_sharpness_instance(2.0**-k, 1.2, 0.3)
        xs.append(-k)
        ys.append(math.log2(mollified_l2(inst.mu, inst.sigma)))
    slope = np.polyfit(xs, ys, 1)[0]
    assert zeta(0.3, inst.t) - 2 - 0.1 <= slope <= 0


def test_exponent_tables():
    assert zeta(0.8, 0.5) == pytest.approx(1.3)
    assert zeta(0.3, 1.2) == pytest.approx(0.8)
    assert gamma(0.5, 0.3) == 0.5 and gamma(0.5, 1.2) == 1.0
    assert f_known(0.6, 1.5) == pytest.approx(1.6)
    assert f_known(0.5, 0.9) is None
    assert f_known(0.3, 1.2) == pytest.approx(1.2)
    with pytest.raises(DomainError):
        zeta(1.5, 0.5)
    with pytest.raises(DomainError):
        zeta(0.5, 2.0)


def test_text_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    w = rng.random(30)
    m = normalize_mass(9, rng.integers(0, 512, (30, 2)), w)
    back = DeltaMeasure.from_text(m.to_text())
    assert np.array_equal(back.weights, m.weights) and np.array_equal(back.cells, m.cells)
    m.save(tmp_path / "m.txt")
    assert (tmp_path / "m.txt").read_text().startswith("level=9 mass=")
    assert np.array_equal(DeltaMeasure.load(tmp_path / "m.txt").weights, m.weights)


@settings(max_examples=40, deadline=None)
@given(cells_st, st.floats(0.0, 1.9))
def test_frostman_monotone_in_u(cells, u):
    m = normalize_mass(6, cells, np.ones(len(cells)))
    assert frostman_constant(m, u) <= frostman_constant(m, u + 0.1) + 1e-12


@settings(max_examples=40, deadline=None)
@given(cells_st, cells_st, st.floats(0, 2))
def test_katz_tao_union(a, b, s):
    A, B = CubeSet(6, a), CubeSet(6, b)
    assert katz_tao_constant(A.union(B), s) <= katz_tao_constant(A, s) + katz_tao_constant(B, s) + 1e-9


@settings(max_examples=25, deadline=None)
@given(cells_st, cells_st)
def test_mollified_symmetric(a, b):
    mu = normalize_mass(6, a, np.arange(1, len(a) + 1))
    sg = normalize_mass(6, b, np.ones(len(b)))
    assert mollified_l2(mu, sg) == pytest.approx(mollified_l2(sg, mu), rel=1e-12)
