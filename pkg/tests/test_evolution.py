import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from mergesplit import evolution as ev
from mergesplit.errors import DomainError

GRID = ev.GridSpec(1e-8, 1e6, 20).build()


@given(st.floats(min_value=-0.45, max_value=3.0))
def test_average_of_power_is_exact(p):
    g = ev.GridFunction.from_callable(lambda s: s**p, GRID)
    np.testing.assert_allclose(ev.average(g), GRID**p / (p + 1.0), rtol=1e-12)


@given(st.floats(min_value=-0.45, max_value=2.0), st.floats(min_value=0.3, max_value=3.0))
def test_weighted_average_of_power(p, m):
    # the local-power closure is trusted only above -m/2
    assume(p > -0.5 * m)
    g = ev.GridFunction.from_callable(lambda s: s**p, GRID, weight_exponent=m)
    np.testing.assert_allclose(ev.average(g), m / (p + m) * GRID**p, rtol=1e-12)


@given(st.floats(min_value=0.05, max_value=0.45))
def test_hardy_ratio_of_critical_power(delta):
    g = ev.GridFunction.from_callable(lambda s: s ** (-0.5 + delta), GRID)
    assert ev.hardy_ratio(g) == pytest.approx(1.0 / (0.5 + delta), rel=1e-10)


def test_averaging_off_grid_matches_nodes():
    s = np.geomspace(1e-3, 1e3, 17)
    exact = 1.0 - np.log1p(s) / s
    errs = []
    for per_decade in (20, 40):
        g = ev.GridFunction.from_callable(lambda x: x / (1 + x), ev.GridSpec(1e-8, 1e6, per_decade).build())
        errs.append(np.max(np.abs(ev.averaging(g, s) / exact - 1.0)))
    # second-order quadrature in log s
    assert errs[1] < 1e-4
    assert 3.5 < errs[0] / errs[1] < 4.5


@settings(max_examples=20)
@given(st.lists(st.floats(min_value=0.0, max_value=50.0), min_size=8, max_size=8))
def test_imex_step_keeps_positivity(knots):
    # piecewise-constant-in-log-s random data, nonnegative
    s = ev.GridSpec(1e-4, 1e4, 10).build()
    vals = np.repeat(knots, math.ceil(s.size / 8))[: s.size]
    state = ev.EvolutionState(ev.GridFunction(s, vals, left_exponent=0.0), 0.0, math.inf)
    for _ in range(20):
        state = ev.step_imex(state, 1e-2)
        assert np.all(state.values >= 0.0)


def test_m0_follows_logistic_to_first_order():
    errs = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        s = ev.EvolutionState(ev.GridFunction(GRID, np.ones_like(GRID)), 0.0, 0.3)
        for _ in range(int(round(2.0 / dt))):
            s = ev.step_imex(s, dt)
        errs.append(abs(s.m0 - float(ev.logistic_m0(0.3, 2.0))))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(1.8 < r < 2.2 for r in ratios)


def test_logistic_closed_form_example():
    # m0(0) = 2 gives 1 / (1 - e^{-t} / 2)
    assert float(ev.logistic_m0(2.0, 5.0)) == pytest.approx(1.0 / (1.0 - 0.5 * math.exp(-5.0)), rel=1e-15)
    assert float(ev.logistic_m0(2.0, 5.0)) == pytest.approx(1.003383, abs=5e-6)


def test_richardson_m0_is_second_order():
    exact = float(ev.logistic_m0(2.0, 5.0))
    u0 = ev.GridFunction(GRID, np.full_like(GRID, 2.0))
    errs = [abs(ev.evolve(u0, 5.0, dt, m0=2.0, richardson=True)[-1].m0 - exact) for dt in (1e-2, 5e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_logistic_check_passes():
    from mergesplit.acceptance import logistic_check

    assert logistic_check().passed


def test_constant_data_follow_logistic():
    # U = m is constant in s, so the equation reduces to m' = m - m^2
    u0 = ev.GridFunction(GRID, np.full_like(GRID, 0.25))
    snaps = ev.evolve(u0, 1.0, 1e-2, m0=0.25, richardson=True)
    np.testing.assert_allclose(snaps[-1].values, ev.logistic_m0(0.25, 1.0), rtol=1e-4)


def test_profile_is_stationary_after_rescaling(profile_half):
    u0 = ev.GridFunction.from_callable(profile_half, ev.GridSpec().build())
    plain = ev.evolve(u0, 2.0, 1e-2)[-1]
    rich = ev.evolve(u0, 2.0, 1e-2, richardson=True)[-1]
    e_plain = ev.rescaled_error(plain, profile_half)
    e_rich = ev.rescaled_error(rich, profile_half)
    assert e_rich < 1e-4
    assert e_rich < 0.1 * e_plain


def test_comparison_pair_stays_ordered():
    s = ev.GridSpec(1e-8, 1e6, 20).build()
    u0 = ev.GridFunction.from_callable(lambda x: 2 * x**0.5 / (1 + x**0.5), s)
    v0 = ev.GridFunction.from_callable(lambda x: x**0.5 / (1 + x**0.5), s)
    rep = ev.comparison_test(u0, v0, 2.0)
    assert rep.ok and rep.min_difference >= 0.0


def test_comparison_rejects_unordered_data():
    u0 = ev.GridFunction(GRID, np.zeros_like(GRID))
    v0 = ev.GridFunction(GRID, np.ones_like(GRID))
    with pytest.raises(DomainError):
        ev.comparison_test(u0, v0, 1.0)


@pytest.mark.parametrize("alpha", [0.3, 0.7])
def test_decomposition_is_consistent(alpha):
    s = ev.GridSpec(1e-6, 1e4, 20).build()
    v0 = ev.GridFunction.from_callable(lambda w: w / (1 + w), s)
    assert ev.decomposition_check(alpha, v0, 1.0).ok


def test_step_size_guard():
    s = ev.EvolutionState(ev.GridFunction(GRID, np.ones_like(GRID)), 0.0, 1.0)
    with pytest.raises(DomainError):
        ev.step_imex(s, 0.02)


def test_extrapolation_requires_nesting():
    with pytest.raises(DomainError):
        # 3.3 cells rounds to 3, 6.6 to 7: the doubled grid is not a refinement
        ev.evolve_extrapolated(lambda s: s**0.5, ev.GridSpec(1.0, 10 ** (3.3 / 7), 7), 0.1, snapshot_times=[0.1])


def test_grid_must_be_geometric():
    with pytest.raises(DomainError):
        ev.GridFunction(np.array([1.0, 2.0, 5.0]), np.zeros(3))


def test_average_of_elementary_functions():
    for func, expect in ((lambda s: 3.0 + 0 * s, lambda s: 3.0 + 0 * s), (lambda s: s, lambda s: s / 2)):
        g = ev.GridFunction.from_callable(func, GRID)
        np.testing.assert_allclose(ev.average(g), expect(GRID), rtol=1e-13)
    assert ev.hardy_ratio(ev.GridFunction(GRID, np.ones_like(GRID))) == pytest.approx(1.0, rel=1e-12)


def test_hardy_extremizer_approaches_two():
    g = ev.GridFunction.from_callable(lambda s: s**-0.49, GRID)
    assert ev.hardy_ratio(g) == pytest.approx(1 / 0.51, rel=1e-10)


@pytest.mark.parametrize("level", [0.0, 1.0])
def test_equilibria_preserved_by_step(level):
    s = ev.EvolutionState(ev.GridFunction(GRID, np.full_like(GRID, level)), 0.0, math.inf)
    out = ev.evolve(s.grid, 1.0, 1e-2)[-1]
    np.testing.assert_allclose(out.values, level, atol=1e-15)


def test_step_is_consistent_with_equation():
    g = ev.GridFunction.from_callable(lambda s: s**0.5 / (1 + s**0.5), GRID)
    u = g.values
    dt = 1e-6
    new = ev.step_imex(ev.EvolutionState(g, 0.0, math.inf), dt).values
    rate = -u * u - u + 2 * ev.average(g)
    np.testing.assert_allclose((new - u) / dt, rate, atol=1e-5)


def test_profile_orbit_at_time_zero(profile_half):
    u0 = ev.GridFunction.from_callable(profile_half, ev.GridSpec().build())
    state = ev.EvolutionState(u0, 0.0, math.inf)
    # off-node samples come from the cubic spline in log s
    assert ev.rescaled_error(state, profile_half) < 1e-9


def test_sandwich_pair_stays_ordered(profile_half):
    # u(cs) <= s^alpha for c = 1 since u(z) <= z^alpha
    s = ev.GridSpec(1e-8, 1e6, 20).build()
    u0 = ev.GridFunction.from_callable(lambda x: x**0.5, s)
    v0 = ev.GridFunction.from_callable(profile_half, s)
    assert ev.comparison_test(u0, v0, 2.0).ok


def test_identical_pair_has_zero_gap():
    g = ev.GridFunction.from_callable(lambda x: x / (1 + x), GRID)
    assert ev.comparison_test(g, g, 0.5).min_difference == 0.0


def test_decomposition_canonical_and_trivial_cases():
    s = ev.GridSpec(1e-6, 1e4, 20).build()
    assert ev.decomposition_check(0.5, ev.GridFunction.from_callable(lambda w: w, s), 1.0).ok
    assert ev.decomposition_check(1.0, ev.GridFunction.from_callable(lambda w: w / (1 + w), s), 1.0).ok
    assert ev.decomposition_check(0.4, ev.GridFunction(s, np.ones_like(s)), 1.0).ok
