import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from frostman_lab._common import DegenerateInputError, DomainError, PreconditionError
from frostman_lab.curve import (CurvedTube, curve_distance, curve_from_record, eval_curve, exp_curve,
                                monotone_split, parabola, polynomial_curve, tube_box_hits_certified,
                                tube_box_hits_exact, tube_cube_intersects, tube_intersection_diameter,
                                vertical_tubes_may_meet)
from frostman_lab.dyadic import DyadicCube


def dense_distance(spec, q, p, n=1_000_001):
    x = np.linspace(-1, 1, n)
    y = spec.func(x)[0]
    return float(np.min(np.hypot(x + q[0] - p[0], y + q[1] - p[1])))


def test_parabola_values():
    P = parabola()
    assert tuple(eval_curve(P, 0.0)) == (0.0, 0.0, 2.0)
    assert tuple(eval_curve(P, 1.0)) == (1.0, 2.0, 2.0)
    with pytest.raises(DomainError):
        eval_curve(P, 3.5)


def test_vertex():
    assert parabola().vertex == 0.0
    assert abs(exp_curve().vertex + 1.0) < 1e-12


@pytest.mark.parametrize("p, want", [((0, 0), 0.0), ((0, -0.1), 0.1)])
def test_distance_trivial(p, want):
    assert curve_distance(parabola(), (0, 0), p) == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("spec", [parabola(), exp_curve()])
def test_distance_dense_oracle(spec):
    rng = np.random.default_rng(3)
    q = (0.2, -0.3)
    for p in rng.uniform(-1.5, 1.5, size=(6, 2)):
        assert curve_distance(spec, q, p) == pytest.approx(dense_distance(spec, q, p), abs=1e-9)
    assert curve_distance(parabola(), (0, 0), (0.5, 0)) == pytest.approx(
        dense_distance(parabola(), (0, 0), (0.5, 0)), abs=1e-9)


def test_tube_cube_examples():
    t = CurvedTube((0, 0), 2.0**-6, parabola())
    k = 6
    cube = lambda x, y: DyadicCube(k, math.floor(x * 2**k), math.floor(y * 2**k))
    assert tube_cube_intersects(t, cube(0, 0))
    assert not tube_cube_intersects(t, cube(0, 0.9))
    assert tube_cube_intersects(t, cube(0.5, 0.25))


def test_exact_and_certified_agree():
    rng = np.random.default_rng(0)
    for spec in (parabola(), exp_curve()):
        lo, hi = -1.0, 1.0
        x0 = rng.uniform(-1.5, 1.5, 4000)
        y0 = rng.uniform(-0.5, 2.5, 4000)
        w = rng.choice([2.0**-4, 2.0**-6, 2.0**-8], 4000)
        boxes = np.stack([x0, x0 + w, y0, y0 + w], 1)
        th = 2.0**-6
        assert np.array_equal(tube_box_hits_exact(spec, lo, hi, boxes, th),
                              tube_box_hits_certified(spec, lo, hi, boxes, th))


def test_monotone_split():
    dec, inc = monotone_split(CurvedTube((0.3, 0.1), 0.01, parabola()))
    assert dec.domain == (-1.0, 0.0) and inc.domain == (0.0, 1.0)
    with pytest.raises(PreconditionError):
        monotone_split(dec)


def test_increasing_curve_has_point_decreasing_branch():
    spec = polynomial_curve([1.0, 3.0, 0.0], name="steep")
    dec, inc = monotone_split(CurvedTube((0, 0), 0.01, spec))
    assert dec.domain == (-1.0, -1.0) and inc.domain == (-1.0, 1.0)


def test_diameter_examples():
    P = parabola()
    d = tube_intersection_diameter(P, (0, 0), (0.5, 0), 1e-3)
    assert 2e-3 <= d <= 2e-2
    with pytest.raises(DegenerateInputError):
        tube_intersection_diameter(P, (0, 0), (0, 1), 1e-3)
    assert not vertical_tubes_may_meet(P, (0, 0), (0, 1), 1e-3)
    assert tube_intersection_diameter(P, (0, 0), (1e-3, 0), 0.5) <= 2 + 2 * 0.5


def test_diameter_brute_force():
    P, delta = parabola(), 1e-3
    q1, q2 = (0.0, 0.0), (0.5, 0.0)
    d = tube_intersection_diameter(P, q1, q2, delta)
    # local grid around the crossing at x = 0.25
    g = np.linspace(-0.02, 0.02, 2001)
    X, Y = np.meshgrid(0.25 + g, 0.0625 + g, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], 1)
    inside = (curve_distance(P, q1, pts) <= delta) & (curve_distance(P, q2, pts) <= delta)
    sel = pts[inside]
    hull = sel[ConvexHull(sel).vertices]
    brute = pdist(hull).max()
    assert d == pytest.approx(brute, rel=0.05)


def test_record_round_trip():
    spec = polynomial_curve([1.5, 0.2, 0.1])
    back = curve_from_record(spec.to_record())
    x = np.linspace(-1, 1, 11)
    assert np.allclose(back.func(x)[0], spec.func(x)[0])


def test_polynomial_convexity_required():
    with pytest.raises(DomainError):
        polynomial_curve([0.0, 0.0, 0.0, 1.0])


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-2, 2), st.floats(-1, 3))
def test_distance_translation_equivariant(qx, qy, px, py):
    P = parabola()
    a = curve_distance(P, (qx, qy), (px, py))
    b = curve_distance(P, (0, 0), (px - qx, py - qy)) if max(abs(px - qx), abs(py - qy)) <= 4 else a
    assert a == pytest.approx(b, abs=1e-12)
    assert a <= math.hypot(px - qx, py - qy) + 1e-12
