import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ruintail.errors import EmptyInput, InsufficientPositiveSamples, InsufficientTailPoints
from ruintail.estimate import (
    DoublingCheck,
    EmpiricalTail,
    c_plus_plateau,
    default_hill_k,
    default_u_grid,
    empirical_tail,
    estimate_ruin,
    hill_estimate,
    hill_sweep,
    kesten_from_cycles,
    loglog_fit,
    ruin_from_batches,
    tail_report,
    wilson_interval,
)
from ruintail.model import reference_model
from ruintail.pathsim import SimConfig, simulate_cycles, simulate_paths

from oracles import pareto_samples


def exact_tail(u, g):
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    return EmpiricalTail(u, g, 10**9, g, g)


# --- empirical tail ---------------------------------------------------------


def test_strict_inequality_count():
    t = empirical_tail([1.0, 2.0, 3.0], [0.5, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(t.g_bar, [1.0, 1 / 3, 0.0, 0.0])
    assert t.n == 3
    np.testing.assert_array_equal(t.counts, [3, 1, 0, 0])


def test_empty_input():
    with pytest.raises(EmptyInput):
        empirical_tail([], [1.0])


def test_descending_grid_rejected():
    with pytest.raises(ValueError):
        empirical_tail([1.0, 2.0], [2.0, 1.0])


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=200),
       st.lists(st.floats(-120, 120), min_size=1, max_size=30))
def test_tail_monotone_and_bounded(samples, grid):
    t = empirical_tail(samples, sorted(grid))
    assert np.all((0 <= t.g_bar) & (t.g_bar <= 1))
    assert np.all(np.diff(t.g_bar) <= 0)
    assert np.all(t.ci_lo <= t.g_bar + 1e-15) and np.all(t.g_bar <= t.ci_hi + 1e-15)


@given(st.integers(0, 10**6), st.integers(1, 10**6))
def test_wilson_contains_point_estimate(k, n):
    k = min(k, n)
    lo, hi = wilson_interval(k, n)
    assert 0 <= lo <= k / n + 1e-12 and k / n - 1e-12 <= hi <= 1


def test_default_grid_positive_and_geometric():
    x = np.concatenate([-np.arange(1, 1001.0), pareto_samples(np.random.default_rng(0), 500, 2.0)])
    g = default_u_grid(x)
    assert g[0] > 0
    ratios = g[1:] / g[:-1]
    np.testing.assert_allclose(ratios, ratios[0])
    assert ratios[0] <= 10 ** (1 / 20) + 1e-12
    with pytest.raises(InsufficientPositiveSamples):
        default_u_grid(-np.ones(10))


# --- Hill --------------------------------------------------------------------


def test_hill_on_exact_pareto(rng):
    x = pareto_samples(rng, 10**6, 2.0)
    assert hill_estimate(x, default_hill_k(x.size)) == pytest.approx(2.0, abs=0.05)


def test_hill_degenerate_samples():
    with pytest.raises(InsufficientPositiveSamples):
        hill_estimate(np.ones(100), 10)
    with pytest.raises(InsufficientPositiveSamples):
        hill_estimate(-np.arange(100.0), 10)
    with pytest.raises(ValueError):
        hill_estimate(np.arange(1, 100.0), 1)


def test_hill_ignores_nonpositive_samples(rng):
    x = pareto_samples(rng, 10_000, 3.0)
    mixed = np.concatenate([x, -x, np.zeros(50)])
    assert hill_estimate(mixed, 200) == hill_estimate(x, 200)


def test_hill_sweep_keys(rng):
    sweep = hill_sweep(pareto_samples(rng, 50_000, 1.5))
    assert set(sweep) == {"n^1/2", "n^2/3", "n^0.8"}
    assert all(abs(v - 1.5) < 0.2 for v in sweep.values())


def test_hill_deterministic(rng):
    x = pareto_samples(rng, 10_000, 2.0)
    assert hill_estimate(x, 300) == hill_estimate(x.copy()[::-1], 300)


# --- log-log fit ------------------------------------------------------------------


def test_exact_power_law_fit():
    u = np.geomspace(10, 1000, 41)
    fit = loglog_fit(exact_tail(u, u**-2.0))
    assert fit.slope == pytest.approx(-2.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert not fit.curved


def test_exponential_tail_flagged_curved():
    u = np.geomspace(5, 30, 41)
    power = loglog_fit(exact_tail(u, u**-2.0))
    expo = loglog_fit(exact_tail(u, np.exp(-u)))
    assert expo.curved
    assert expo.r2 < power.r2


def test_too_few_points():
    u = np.array([10.0, 20.0, 30.0, 40.0])
    with pytest.raises(InsufficientTailPoints):
        loglog_fit(exact_tail(u, u**-2.0))


# --- plateau ---------------------------------------------------------------------------


def test_plateau_exact_constant():
    u = np.geomspace(1, 1000, 61)
    p = c_plus_plateau(exact_tail(u, 3.0 * u**-1.7), 1.7)
    np.testing.assert_allclose(p.values, 3.0)
    assert p.stable and p.level == pytest.approx(3.0)
    assert p.u.min() >= 100 - 1e-9


def test_plateau_exponential_unstable():
    u = np.geomspace(1, 40, 61)
    p = c_plus_plateau(exact_tail(u, np.exp(-u)), 1.7)
    assert not p.stable
    assert p.values[-1] < p.values[0]


def test_plateau_zero_tail():
    p = c_plus_plateau(exact_tail([1.0, 2.0], [0.0, 0.0]), 1.0)
    assert not p.stable and p.level == 0.0


def test_tail_report_on_pareto(rng):
    x = pareto_samples(rng, 10**6, 1.6)
    rep = tail_report(x, 1.6)
    assert rep.beta_hat_hill == pytest.approx(1.6, abs=0.05)
    assert rep.beta_hat_ols == pytest.approx(1.6, abs=0.1)
    assert rep.plateau.stable
    assert rep.negative_plateau is None
    assert np.all(rep.c_plus_plateau >= 0)


def test_tail_report_two_sided(rng):
    x = pareto_samples(rng, 200_000, 2.0) * np.where(rng.random(200_000) < 0.5, 1, -1)
    rep = tail_report(x, 2.0)
    assert rep.negative_plateau is not None
    assert rep.negative_plateau.level == pytest.approx(rep.plateau.level, rel=0.3)


# --- ruin -------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_ruin():
    u = [0.001, 1.0, 5.0, 10.0, 20.0]
    cfg = SimConfig(seed=31, n_paths=20_000)
    return estimate_ruin(reference_model(), cfg, u)


def test_ruin_near_zero_capital(small_ruin):
    # sup >= limit, so a positive limit means ruin at vanishing capital
    est = small_ruin
    for i in (0, 1):
        assert est.ci_hi[i][0] >= est.g0_ci_lo[i]


def test_ruin_monotone_and_bounded(small_ruin):
    for i in (0, 1):
        p = small_ruin.psi_hat[i]
        assert np.all(np.diff(p) <= 0)
        assert np.all((0 <= p) & (p <= 1))
        assert np.all(small_ruin.sandwich_low(i) <= small_ruin.sandwich_high(i))


def test_sandwich_small_sample(small_ruin):
    for i in (0, 1):
        assert np.all(small_ruin.sandwich_holds(i))


def test_truncation_bias_small(small_ruin):
    for i in (0, 1):
        assert np.all(small_ruin.truncation_bias_bound[i] < 1e-8)


def test_ruin_needs_both_regimes():
    b = simulate_paths(reference_model(), SimConfig(seed=1, n_paths=10))
    with pytest.raises(ValueError):
        ruin_from_batches({0: b}, [1.0])


# --- Kesten conditions ------------------------------------------------------------------


def test_doubling_check():
    assert DoublingCheck(1.0, 1.03).stable()
    assert not DoublingCheck(1.0, 1.2).stable()
    assert not DoublingCheck(1.0, math.inf).stable()


def test_kesten_report_left_of_root():
    spec = reference_model()
    cycles = simulate_cycles(spec, SimConfig(seed=3), 50_000)
    rep = kesten_from_cycles(cycles, spec.regimes.beta0 / 2)
    assert rep.m_beta_mean < 1
    assert not rep.m_beta_ok()
    assert "Gaussian" in rep.non_arithmetic
