import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypimcf.hypgeo import (
    ORIGIN,
    BallPoint,
    GeodesicPoint,
    HalfSpace,
    SphereInversion,
    bisecting_inversion,
    hyp_distance,
    invert,
    lambda_from_radius,
    potential,
    r_to_rho,
    reflection_threshold,
    rho_to_r,
    sinh_r_from_rho,
    to_ball,
    to_geodesic,
)

e1 = np.array([1.0, 0.0, 0.0])


def random_ball(rng, size, n=3, rmax=0.95):
    d = rng.normal(size=(size, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * rng.uniform(0.0, rmax, size)[:, None]


def test_to_geodesic_examples():
    p = to_geodesic(BallPoint(0.5 * e1))
    assert np.isclose(p.r, math.log(3.0), rtol=0, atol=1e-14)
    assert np.allclose(p.theta, e1)
    q = to_geodesic(BallPoint(0.8 * e1))
    assert np.isclose(math.sinh(q.r), 2.0 / (1.25 - 0.8), rtol=1e-13)
    assert np.isclose(q.r, math.log(9.0), rtol=1e-14)


def test_origin_fixed_point():
    assert to_geodesic(ORIGIN) is ORIGIN
    assert to_geodesic(BallPoint(np.zeros(3))) is ORIGIN
    assert np.isclose(rho_to_r(1e-9), 2e-9, rtol=1e-8)
    with pytest.raises(ValueError):
        GeodesicPoint(e1, 0.0)
    with pytest.raises(ValueError):
        to_ball(ORIGIN)


def test_to_ball_examples():
    assert np.isclose(to_ball(GeodesicPoint(e1, math.log(3.0))).rho, 0.5, atol=1e-15)


def test_round_trip(rng):
    x = random_ball(rng, 1000)
    back = np.array([to_ball(to_geodesic(BallPoint(p))).x for p in x])
    assert np.max(np.abs(back - x)) < 1e-12


def test_sinh_from_rho_matches_closed_form():
    rho = np.linspace(0.01, 0.99, 50)
    assert np.allclose(sinh_r_from_rho(rho), np.sinh(rho_to_r(rho)), rtol=1e-12)
    assert np.allclose(r_to_rho(rho_to_r(rho)), rho, rtol=1e-14)


def test_distance_examples():
    o = np.zeros(3)
    assert np.isclose(hyp_distance(o, 0.5 * e1), math.log(3.0), atol=1e-14)
    assert hyp_distance(0.3 * e1, 0.3 * e1) == 0.0
    assert np.isclose(hyp_distance(0.8 * e1, 0.5 * e1), math.acosh(5.0 / 3.0), atol=1e-14)
    assert np.isclose(math.acosh(5.0 / 3.0), math.log(3.0), atol=1e-14)


def test_potential_origin():
    assert potential(ORIGIN) == 1.0
    assert potential(BallPoint(np.zeros(3))) == 1.0


@pytest.mark.parametrize("r, expected", [(1.0, 1.5430806348152437), (2.0, 3.7621956910836314)])
def test_potential_examples(r, expected):
    # frozen cosh values
    assert np.isclose(potential(GeodesicPoint(e1, r)), expected, rtol=1e-14)


def test_inversion_examples():
    inv = SphereInversion(0.5, e1)
    assert np.isclose(inv.radius, 0.75) and np.allclose(inv.center, 1.25 * e1)
    assert np.allclose(invert(inv, 0.5 * e1), 0.5 * e1, atol=1e-15)
    assert np.allclose(invert(inv, np.zeros(3)), 0.8 * e1, atol=1e-15)
    d0 = hyp_distance(np.zeros(3), 0.5 * e1)
    d1 = hyp_distance(invert(inv, np.zeros(3)), invert(inv, 0.5 * e1))
    assert np.isclose(d0, d1, atol=1e-13) and np.isclose(d1, math.log(3.0), atol=1e-13)


def test_inversion_rejects_bad_parameters():
    with pytest.raises(ValueError):
        SphereInversion(1.2, e1)
    with pytest.raises(ValueError):
        SphereInversion(0.5, 2 * e1)
    with pytest.raises(ValueError):
        SphereInversion.from_center_radius(2 * e1, 1.0)


def test_from_center_radius_round_trip():
    inv = SphereInversion(0.3, np.array([0.0, 0.6, 0.8]))
    again = SphereInversion.from_center_radius(inv.center, inv.radius)
    assert np.isclose(again.lam, 0.3, rtol=1e-13)


def test_halfspace_is_outer_cap():
    inv = SphereInversion(0.5, e1)
    H = HalfSpace(inv)
    assert H.contains(0.9 * e1)
    assert not H.contains(0.2 * e1)
    assert not H.contains(-0.9 * e1)


def test_bisecting_example():
    x1, x2 = 0.5 * e1, 0.8 * e1
    inv = bisecting_inversion(x1, x2)
    s0 = 0.75 / 0.39
    assert np.isclose(s0, 1.9230769, atol=1e-7)
    assert np.allclose(inv.center, (1 - s0) * x1 + s0 * x2, atol=1e-14)
    assert np.isclose(inv.center[0], 1.0769231, atol=1e-7)
    assert np.isclose(inv.radius**2, 0.1597633, atol=1e-7)
    assert abs(inv.center @ inv.center - inv.radius**2 - 1.0) < 1e-12
    assert np.allclose(invert(inv, x2), x1, atol=1e-12)
    # equal directions keep the centre on the ray
    assert np.allclose(np.cross(inv.center, e1), 0.0, atol=1e-15)


def test_bisecting_rejects_degenerate():
    with pytest.raises(ValueError):
        bisecting_inversion(0.5 * e1, 0.5 * e1)
    with pytest.raises(ValueError):
        bisecting_inversion(np.zeros(3), 0.5 * e1)


def test_reflection_threshold_example():
    k = reflection_threshold(0.3, 0.5, 0.6)
    assert np.isclose(k, math.sqrt(0.675 / 6.9511), rtol=1e-5)
    assert np.isclose(k, 0.311620, atol=1e-6)


def test_reflection_threshold_blows_up_near_rho_plus():
    ks = [reflection_threshold(0.3, 0.3 + d, 0.6) for d in (1e-2, 1e-4, 1e-6)]
    assert ks[0] < ks[1] < ks[2] and ks[2] > 100


def test_lambda_from_radius_inverts_radius():
    for lam in (1e-6, 0.1, 0.5, 0.99):
        R = 0.5 * (1 / lam - lam)
        assert np.isclose(lambda_from_radius(R), lam, rtol=1e-12)


# --- properties -------------------------------------------------------------------

unit = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda v: 0.1 < np.linalg.norm(v)
).map(lambda v: np.array(v) / np.linalg.norm(v))


@given(st.floats(0.02, 0.98), unit, st.floats(0.0, 0.95), unit, st.floats(0.0, 0.95), unit)
def test_inversion_is_isometric_involution(lam, theta, a, u, b, w):
    inv = SphereInversion(lam, theta)
    p, q = a * u, b * w
    if min(np.linalg.norm(p - inv.center), np.linalg.norm(q - inv.center)) < 1e-6:
        return
    Fp, Fq = invert(inv, p), invert(inv, q)
    assert np.linalg.norm(Fp) < 1.0 + 1e-12
    assert np.isclose(hyp_distance(Fp, Fq), hyp_distance(p, q), rtol=1e-9, atol=1e-10)
    assert np.allclose(invert(inv, Fp), p, atol=1e-10)


@given(st.floats(0.05, 0.9), st.floats(1e-4, 0.09), unit, unit)
def test_bisecting_relative_precision(r1, gap, u, w):
    # near-degenerate pairs push the centre far out; the identity holds to relative precision
    x1, x2 = r1 * u, (r1 + gap) * w
    inv = bisecting_inversion(x1, x2)
    c2 = inv.center @ inv.center
    assert abs(c2 - inv.radius**2 - 1.0) <= 1e-13 * max(1.0, c2)
    assert np.allclose(invert(inv, x2), x1, atol=1e-10)


@given(st.floats(0.05, 0.4), st.floats(0.0, 0.1), st.floats(0.01, 0.3))
def test_threshold_increases_in_rho2(rho_plus, d1, d2):
    rho1 = rho_plus + 0.05 + d1
    a = reflection_threshold(rho_plus, rho1, rho1 + d2)
    b = reflection_threshold(rho_plus, rho1, rho1 + d2 + 0.05)
    assert b > a
