import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from mergesplit import transforms as tr
from mergesplit.errors import DomainError, FitError, OscillationError, PrecisionError

X = np.geomspace(0.1, 10.0, 21)


def test_weights_sum_to_zero():
    # inverting the transform of 1 (namely 1/q) must give 1 for any x
    for order in (8, 12, 18):
        assert sum(tr._exact_weights(order)) == 0
    # rounded weights grow like 10**(order/2), so float results degrade with order
    for order, tol in ((8, 1e-11), (12, 1e-9), (18, 1e-5)):
        vals, _ = tr.invert_laplace(lambda q: 1.0 / q, X, order)
        np.testing.assert_allclose(vals, 1.0, rtol=tol)


def test_double_precision_exponential():
    vals, order = tr.invert_laplace(lambda q: 1.0 / (1.0 + q), X)
    assert order in tr.DEFAULT_ORDERS
    # double precision stalls near 5e-5 absolute for this transform
    assert np.max(np.abs(vals - np.exp(-X))) < 1e-4


def test_multiprecision_exponential():
    vals, _ = tr.invert_laplace(lambda q: 1 / (1 + q), X, order=32, dps=60)
    assert np.max(np.abs(vals - np.exp(-X))) < 1e-6
    vals, _ = tr.invert_laplace(lambda q: 1 / (1 + q), X, order=40, dps=80)
    assert np.max(np.abs(vals / np.exp(-X) - 1.0)) < 1e-6


def test_odd_order_rejected():
    with pytest.raises(DomainError):
        tr.stehfest_weights(7)


def test_stable_half_closed_form():
    k = tr.StableKernel(0.5)
    x = np.geomspace(1e-2, 1e3, 200)
    closed = x**-1.5 * np.exp(-0.25 / x) / (2 * math.sqrt(math.pi))
    np.testing.assert_allclose(k(x), closed, rtol=1e-9)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_stable_routes_agree_at_cutoff(alpha):
    k = tr.StableKernel(alpha)
    x = k.series_cutoff * np.array([1.0, 2.0, 5.0])
    np.testing.assert_allclose(k.integral(x), k.series(x), rtol=1e-9)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_stable_normalized(alpha):
    assert tr.StableKernel(alpha).normalization() == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=10)
@given(st.floats(min_value=0.2, max_value=0.8))
def test_stable_laplace_transform(alpha):
    k = tr.StableKernel(alpha)
    # int (1 - e^{-q x}) p(x) dx = 1 - exp(-q**alpha)
    for q in (0.3, 1.0, 3.0):
        assert tr.bernstein_of_density(lambda y: float(k(y)), q)[0] == pytest.approx(-math.expm1(-(q**alpha)), rel=1e-6)


def test_series_precision_guard():
    k = tr.StableKernel(0.5, series_cutoff=1e-4)
    with pytest.raises(PrecisionError):
        k.series(1e-3)


@given(st.floats(min_value=-3.0, max_value=-0.5), st.floats(min_value=0.1, max_value=10.0))
def test_power_fit_recovers_exact_power(p, amp):
    x = np.geomspace(1.0, 1e4, 40)
    fit = tr.tail_exponent_fit(x, amp * x**p)
    assert fit.exponent == pytest.approx(p, rel=1e-10)
    assert fit.amplitude == pytest.approx(amp, rel=1e-9)


def test_fit_needs_decades():
    x = np.geomspace(1.0, 10.0, 10)
    with pytest.raises(FitError):
        tr.tail_exponent_fit(x, x**-1.0)


@given(st.floats(min_value=0.1, max_value=0.9), st.floats(min_value=0.1, max_value=5.0))
def test_karamata_chain_is_consistent(alpha, amp):
    pre = tr.karamata_prefactors(amp, alpha)
    # d/ds of K s**alpha is alpha K s**(alpha - 1)
    assert pre["derivative"] / pre["transform"] == pytest.approx(alpha, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.6])
def test_bernstein_of_pure_power(alpha):
    c = alpha / gamma(1 - alpha)
    s = np.array([0.1, 1.0, 10.0])
    vals = tr.bernstein_of_density(lambda x: c * x ** (-1 - alpha), s)
    np.testing.assert_allclose(vals, s**alpha, rtol=1e-8)


def test_cm_probe_accepts_cm_functions():
    x = np.geomspace(0.1, 10, 60)
    for vals in (np.exp(-x), x**-1.5, 1 / (1 + x)):
        assert tr.cm_probe(tr.DensitySample(x, vals, "exact", 0.5), depth=4).ok


def test_cm_probe_rejects_hump():
    x = np.geomspace(0.1, 10, 60)
    rep = tr.cm_probe(tr.DensitySample(x, x * np.exp(-x), "exact", 0.5), depth=3)
    assert not rep.ok and rep.depth == 1


def test_inverted_profile_is_cm(profile_half):
    x = np.geomspace(1e-3, 1e3, 121)
    f = tr.invert_profile(profile_half, x)
    assert tr.cm_probe(f, depth=2, tol=1e-3).ok


def test_profile_mass_with_end_corrections(profile_half):
    x = np.geomspace(1e-6, 1e6, 241)
    f = tr.invert_profile(profile_half, x)
    head, tail = tr.predicted_end_masses(profile_half.params, x[0], x[-1])
    raw = tr.density_mass(f)
    assert raw < 0.99
    assert 0.99 <= raw + head + tail <= 1.0 + 1e-3


def test_companion_small_tau_exponent(profile_half):
    p = profile_half.params
    tau = np.geomspace(1e-8, 1e-5, 31)
    g = tr.invert_companion(profile_half, tau)
    fit = tr.tail_exponent_fit(tau, g.values)
    # transform ~ c_hat w**(-alpha_hat/alpha) at large w
    assert fit.exponent == pytest.approx(p.alpha_hat / p.alpha - 1.0, abs=0.02)


def test_subordination_warns_on_short_grid(profile_half):
    tau = np.geomspace(1e-2, 1.0, 41)
    g = tr.invert_companion(profile_half, tau)
    with pytest.warns(tr.TailTruncationWarning):
        tr.subordinate(g, tr.StableKernel(0.5), np.array([1.0, 2.0]))


def test_subordination_rejects_mismatched_alpha(profile_half):
    g = tr.DensitySample(np.geomspace(1e-3, 1, 10), np.ones(10), "x", 0.5)
    with pytest.raises(DomainError):
        tr.subordinate(g, tr.StableKernel(0.3), np.array([1.0, 2.0]))


def test_oscillation_detected():
    # low order on a sharply peaked transform produces a rising output
    with pytest.raises(OscillationError):
        tr._check_monotone(np.array([1.0, 0.5, 0.8]), 1e-4, "probe")
    with pytest.raises(OscillationError):
        tr._check_monotone(np.array([1.0, -0.1]), 1e-4, "probe")


def test_density_rows_carry_provenance():
    d = tr.DensitySample(np.array([1.0, 2.0]), np.array([0.5, 0.25]), "inversion", 0.5, 12)
    assert d.rows()[1] == (2.0, 0.25, "inversion")


def test_small_x_prefactor(profile_half):
    # approached slowly: the next term is relatively O(x**alpha_hat)
    p = profile_half.params
    x = np.array([1e-8])
    f = tr.invert_profile(profile_half, np.array([1e-8, 2e-8]))
    ratio = f.values[0] * x[0] ** (1 - p.alpha_hat) / (p.c_hat / gamma(p.alpha_hat))
    assert ratio == pytest.approx(1.0, abs=0.01)


def test_companion_small_tau_prefactor(profile_half):
    p = profile_half.params
    q = p.alpha_hat / p.alpha
    tau = np.array([1e-10, 2e-10])
    g = tr.invert_companion(profile_half, tau)
    assert g.values[0] * tau[0] ** (1 - q) / (p.c_hat / gamma(q)) == pytest.approx(1.0, abs=1e-3)


def test_kernel_concentrates_near_one_as_alpha_grows():
    from scipy.integrate import quad

    masses = [quad(lambda y: float(tr.StableKernel(a)(y)), 0.7, 1.4, limit=200)[0] for a in (0.9, 0.95, 0.98)]
    assert masses[0] < masses[1] < masses[2]
