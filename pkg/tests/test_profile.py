import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mergesplit import profile as pr
from mergesplit import series as ser
from mergesplit.errors import DomainError, FitError


def test_trajectory_satisfies_equation(profile_half):
    assert pr.residual(profile_half) < 1e-8


def test_trajectory_matches_series(profile_half):
    assert pr.series_mismatch(profile_half) < 1e-6


def test_tail_slope_is_minus_alpha_hat(profile_half):
    ah = profile_half.params.alpha_hat
    assert pr.tail_slope(profile_half) == pytest.approx(-ah, rel=1e-3)


def test_invariant_region(profile_half):
    u, v = profile_half.u_values, profile_half.v_values
    assert np.all(np.diff(u) > 0) and np.all(u < 1)
    assert np.all(v < u) and np.all(v > 0.5 * (u + u * u))


def test_small_z_power_law(profile_half):
    z = np.geomspace(1e-12, 1e-8, 5)
    np.testing.assert_allclose(profile_half(z), np.sqrt(z), rtol=1e-3)


def test_large_z_gap_power_law(profile_half):
    p = profile_half.params
    z = np.array([1e10, 1e12, 1e14])
    np.testing.assert_allclose(profile_half.gap(z), p.c_hat * z ** (-p.alpha_hat), rtol=1e-3)


def test_gap_and_value_agree(profile_half):
    z = np.geomspace(1e-6, 1e6, 61)
    np.testing.assert_allclose(profile_half(z) + profile_half.gap(z), 1.0, atol=1e-12)


def test_profile_monotone_on_all_branches(profile_half):
    z = np.geomspace(1e-10, 1e12, 400)
    assert np.all(np.diff(profile_half(z)) > 0)


def test_average_closes_equation(profile_half):
    # beta z u' + u^2 + u - 2 v with v from quadrature of u itself
    from scipy.integrate import quad

    curve = profile_half
    for z in (0.1, 1.0, 10.0):
        v = quad(lambda r: curve(z * r), 0, 1, epsabs=1e-13, limit=200)[0]
        h = 1e-4
        du = (curve(z * math.exp(h)) - curve(z * math.exp(-h))) / (2 * h)
        u = curve(z)
        assert abs(curve.beta * du + u * u + u - 2 * v) < 1e-6


@settings(max_examples=6)
@given(st.floats(min_value=0.15, max_value=0.9))
def test_profile_routes_agree(alpha):
    curve = pr.build_profile(alpha)
    assert pr.series_mismatch(curve) < 1e-6
    assert pr.residual(curve) < 1e-8
    assert curve.params.c_hat > 0


def test_start_amplitude_guard():
    with pytest.raises(DomainError):
        pr.shoot(0.5, pr.ShootConfig(eps=1e-4))


def test_tail_fit_needs_deep_trajectory():
    data = ser.coefficients(0.5, 400)
    curve = pr.normalize(pr.shoot(0.5, pr.ShootConfig(end_gap=1e-3)), data)
    with pytest.raises(FitError):
        pr.fit_tail(curve)


def test_unnormalized_curve_refuses_evaluation():
    with pytest.raises(DomainError):
        pr.shoot(0.5)(1.0)


def test_start_amplitude_does_not_matter():
    # after normalization, eps and eps/2 starts give the same manifold
    data = ser.coefficients(0.5, 400)
    a = pr.normalize(pr.shoot(0.5, pr.ShootConfig(eps=1e-8)), data)
    b = pr.normalize(pr.shoot(0.5, pr.ShootConfig(eps=5e-9)), data)
    z = np.geomspace(1e-3, 1e3, 41)
    np.testing.assert_allclose(a(z), b(z), rtol=0, atol=1e-8)


def test_fixed_points_of_vector_field():
    for u, v in ((0.0, 0.0), (1.0, 1.0)):
        assert pr.vector_field(u, v, 0.7) == (0.0, 0.0)


def test_equilibria_have_zero_residual():
    ones, zeros = np.ones(9), np.zeros(9)
    assert not np.any(pr.residual_values(0.7, 0.1, ones, ones))
    assert not np.any(pr.residual_values(0.7, 0.1, zeros, zeros))


def test_trajectory_enters_node_with_bounded_slope(profile_half):
    du, dv = pr.vector_field(profile_half.u_values, profile_half.v_values, profile_half.beta)
    slope = dv[-50:] / du[-50:]
    assert np.all((slope >= 1.0) & (slope <= 1.5))
    assert profile_half.gap_values[-1] < 1e-9


def test_normalize_is_idempotent(profile_half):
    again = pr.normalize(profile_half, profile_half.series)
    assert abs(again.normalization_shift - profile_half.normalization_shift) < 1e-12
