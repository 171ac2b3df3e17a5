import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mergesplit import series as ser
from mergesplit.errors import ConvergenceError, DomainError


@pytest.mark.parametrize("n", range(1, 31))
def test_equilibrium_coefficients_are_fuss_catalan(n):
    c = ser.exact_coefficients(1, 30)
    assert c[n - 1] == ser.fuss_catalan(n)


def test_fuss_catalan_small_values():
    # ternary tree counts
    assert [ser.fuss_catalan(n) for n in range(7)] == [1, 1, 3, 12, 55, 273, 1428]


@given(st.integers(min_value=0, max_value=60))
def test_fuss_catalan_matches_binomial_form(n):
    assert ser.fuss_catalan(n) * (3 * n + 1) == math.comb(3 * n + 1, n)


@given(st.fractions(min_value=Fraction(1, 20), max_value=1, max_denominator=20))
def test_float_recursion_tracks_exact(alpha):
    exact = ser.exact_coefficients(alpha, 12)
    data = ser.coefficients(float(alpha), 12)
    approx = data.scaled / data.scale ** np.arange(12)
    np.testing.assert_allclose(approx, [float(c) for c in exact], rtol=1e-11)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_radius_inside_bounds(alpha):
    data = ser.coefficients(alpha, 300)
    lo = (1 - alpha) / (1 + alpha)
    hi = data.denoms[1]
    assert lo <= data.radius_est <= hi


def test_radius_clamp_warns():
    data = ser.coefficients(0.5, 300)
    bad = ser.SeriesData(data.alpha, data.denoms, data.scaled * 0 + 1.0, 1.0, data.radius_est, data.gamma_star)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        r = ser.radius_estimate(bad, strict=False)
    assert r <= data.denoms[1]
    assert any(issubclass(w.category, ser.RadiusBoundWarning) for w in rec)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_gamma_star_completely_monotone(alpha):
    data = ser.coefficients(alpha, 300)
    # the 1/n-extrapolated radius is accurate enough for exact sign alternation
    radius = ser.ratio_diagnostics(data)["extrapolated_radius"]
    assert ser.gamma_star_cm_check(data, depth=5, radius=radius).ok
    # the plain quartile average is slightly high; only the far end notices
    assert ser.gamma_star_cm_check(data, depth=5).worst < 1e-6


def test_gamma_star_fails_at_wrong_radius():
    data = ser.coefficients(0.5, 300)
    report = ser.gamma_star_cm_check(data, depth=3, radius=1.1 * data.radius_est)
    assert not report.ok


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.9])
def test_series_satisfies_equation(alpha):
    data = ser.coefficients(alpha, 300)
    z = np.geomspace(1e-6, (0.5 * data.radius_est) ** (1 / alpha), 50)
    assert np.max(np.abs(ser.series_residual(data, z))) < 1e-12


def test_series_leading_power():
    data = ser.coefficients(0.4, 100)
    z = 1e-10
    assert ser.eval_series(data, z) == pytest.approx(z**0.4, rel=1e-3)


def test_outside_radius_raises():
    data = ser.coefficients(0.5, 100)
    with pytest.raises(ConvergenceError):
        ser.eval_series(data, (2 * data.radius_est) ** 2)


def test_ratio_diagnostics_reports_extrapolation():
    d = ser.ratio_diagnostics(ser.coefficients(0.5, 400))
    assert d["mean_ratio"] > 0


@pytest.mark.parametrize("bad", [0.0, 1.2])
def test_alpha_domain(bad):
    with pytest.raises(DomainError):
        ser.coefficients(bad, 10)


def test_first_coefficients():
    assert ser.exact_coefficients(1, 4) == [1, 3, 12, 55]
    c = ser.exact_coefficients(Fraction(1, 2), 2)
    assert c == [1, Fraction(3, 2)]


def test_alternating_series_below_leading_term():
    data = ser.coefficients(0.5, 100)
    z = np.geomspace(1e-6, 1e-2, 5)
    assert np.all(ser.eval_series(data, z) < np.sqrt(z))


def test_equilibrium_radius_is_four_27ths():
    data = ser.coefficients(1.0, 400)
    # c_n ~ C (27/4)^n n^{-3/2}: the plain average carries an O(1/n) bias
    assert ser.ratio_diagnostics(data)["extrapolated_radius"] == pytest.approx(4 / 27, rel=1e-5)
    assert ser.gamma_star_cm_check(data, 8, radius=4 / 27).ok


def test_gamma_star_starts_at_one():
    assert ser.coefficients(0.37, 50).gamma_star[0] == 1.0


def test_shrunken_radius_keeps_cm():
    # c_{n+1} (qR)^n is a CM sequence times q^n, itself CM, so q < 1 cannot expose a wrong radius
    data = ser.coefficients(0.5, 300)
    radius = ser.ratio_diagnostics(data)["extrapolated_radius"]
    assert ser.gamma_star_cm_check(data, 3, radius=0.9 * radius).ok
