import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from hypergrowth import (ExponentialModel, FitConfig, HyperbolicModel, PiecewiseExponentialModel,
                         PositivityError, TimeSeries, UnderdeterminedError, ValidationError,
                         bootstrap_parameters, eval_model, fit_exponential, fit_hyperbolic_stages,
                         fit_piecewise_exponential, fit_reciprocal_polynomial, refine_nls,
                         sample_series)
from hypergrowth.synth import NoiseSpec
from oracles import exponential_lsq, hyperbolic_lsq

ROCK = np.array([0.0006875, 1.72e-7, 8.7468e-11])


def rel_err(got, want):
    got, want = np.asarray(got, dtype=float), np.asarray(want, dtype=float)
    return np.max(np.abs(got - want) / np.abs(want))


# -- reciprocal OLS --------------------------------------------------------

def test_reciprocal_ols_recovers_rock_shelter(rock_shelter_series):
    fit = fit_reciprocal_polynomial(rock_shelter_series, 2)
    assert rel_err(fit.model.coefficients, ROCK) < 1e-8
    assert fit.model.domain == (0.0, 10000.0)
    assert fit.p == 3 and fit.n == 201


def test_reciprocal_ols_constant_series():
    ts = TimeSeries([0, 10, 20, 30], [4.0] * 4)
    a0, a1 = fit_reciprocal_polynomial(ts, 1).model.coefficients
    assert a0 == pytest.approx(0.25, abs=1e-10)
    assert a1 == pytest.approx(0.0, abs=1e-10)


def test_reciprocal_ols_order_one_exact():
    t = np.arange(50) * 200.0
    ts = TimeSeries(t, 1.0 / (0.001 + 1e-7 * t))
    fit = fit_reciprocal_polynomial(ts, 1)
    assert rel_err(fit.model.coefficients, [0.001, 1e-7]) < 1e-10
    assert fit.rss_reciprocal <= 1e-20


def test_reciprocal_ols_underdetermined():
    with pytest.raises(UnderdeterminedError):
        fit_reciprocal_polynomial(TimeSeries([0, 1, 2], [1, 2, 3]), 2)


def test_reciprocal_ols_positivity_violation():
    ts = TimeSeries([0, 1, 2, 3, 4], 1.0 / np.array([1.0, 0.6, 0.2, 0.01, 0.01]))
    with pytest.raises(PositivityError):
        fit_reciprocal_polynomial(ts, 1)


def test_rescaling_matches_hand_scaling(rock_shelter_model, site_grid):
    ts = sample_series(rock_shelter_model, site_grid, NoiseSpec("multiplicative_lognormal", 0.05), seed=11)
    s = 1000.0  # millennia
    pre = TimeSeries(ts.t / s, ts.values)
    for method in ("reciprocal_ols", "reciprocal_then_nls"):
        auto = fit_hyperbolic_stages(ts, FitConfig(method=method))[-1].model.coefficients
        hand = fit_hyperbolic_stages(pre, FitConfig(method=method, time_rescale="off"))[-1].model.coefficients
        unscaled = np.array(hand) / s ** np.arange(3)
        assert rel_err(auto, unscaled) < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.lists(st.floats(0.05, 5.0), min_size=4, max_size=4),
       st.integers(0, 40))
def test_reciprocal_ols_roundtrip_property(order, raw, extra):
    coefs = [a / 10000.0 ** i for i, a in enumerate(raw[: order + 1])]
    t = np.linspace(0, 10000, 2 * order + 4 + extra)
    ts = TimeSeries(t, 1.0 / np.polynomial.polynomial.polyval(t, coefs))
    fit = fit_reciprocal_polynomial(ts, order)
    assert rel_err(fit.model.coefficients, coefs) < 1e-8


# -- NLS refinement --------------------------------------------------------

def test_refine_at_truth_is_a_fixed_point(rock_shelter_series, rock_shelter_model):
    fit = refine_nls(rock_shelter_series, rock_shelter_model)
    assert fit.converged
    assert fit.iterations <= 1
    assert fit.model.coefficients == rock_shelter_model.coefficients


def test_refine_from_perturbed_start(rock_shelter_series):
    init = HyperbolicModel(tuple(1.1 * ROCK))
    fit = refine_nls(rock_shelter_series, init)
    assert fit.converged
    assert rel_err(fit.model.coefficients, ROCK) < 1e-7


def test_refine_never_worse_than_init(rock_shelter_model, site_grid):
    ts = sample_series(rock_shelter_model, site_grid, NoiseSpec("multiplicative_lognormal", 0.05), seed=5)
    ols = fit_reciprocal_polynomial(ts, 2)
    nls = refine_nls(ts, ols.model)
    assert nls.rss_raw <= ols.rss_raw
    oracle, oracle_rss = hyperbolic_lsq(ts.t, ts.values, ols.model.coefficients)
    assert rel_err(nls.model.coefficients, oracle) < 1e-6
    assert nls.rss_raw == pytest.approx(oracle_rss, rel=1e-9)


def test_refine_returns_start_when_blocked():
    # One NLS iteration cannot converge from a poor start; no crash, flag set.
    t = np.linspace(0, 10, 20)
    ts = TimeSeries(t, 1.0 / (1.0 + 0.5 * t))
    fit = refine_nls(ts, HyperbolicModel((2.0, 0.05)), FitConfig(order=1, max_nls_iterations=1))
    assert not fit.converged
    assert fit.note


def test_stages_by_method(rock_shelter_series):
    assert [f.stage for f in fit_hyperbolic_stages(rock_shelter_series, FitConfig(method="reciprocal_ols"))] \
        == ["reciprocal_ols"]
    assert [f.stage for f in fit_hyperbolic_stages(rock_shelter_series, FitConfig(method="nls"))] == ["nls"]
    assert [f.stage for f in fit_hyperbolic_stages(rock_shelter_series)] == ["reciprocal_ols", "nls"]


@pytest.mark.parametrize("kw", [{"order": 4}, {"max_nls_iterations": 0}, {"nls_tolerance": 0},
                                {"method": "magic"}, {"time_rescale": "on"}])
def test_fit_config_validation(kw):
    with pytest.raises(ValidationError):
        FitConfig(**kw)


# -- exponential -----------------------------------------------------------

def test_exponential_exact_recovery():
    t = np.linspace(0, 10000, 20)
    fit = fit_exponential(TimeSeries(t, 100 * np.exp(-1e-4 * t)))
    assert fit.model.amplitude == pytest.approx(100, rel=1e-10)
    assert fit.model.rate == pytest.approx(1e-4, rel=1e-10)
    assert fit.p == 2


def test_exponential_constant():
    fit = fit_exponential(TimeSeries([0, 1, 2, 3], [7.0] * 4))
    assert fit.model.amplitude == pytest.approx(7.0, rel=1e-12)
    assert fit.model.rate == pytest.approx(0.0, abs=1e-12)


def test_exponential_needs_three_points():
    with pytest.raises(UnderdeterminedError):
        fit_exponential(TimeSeries([0, 1], [1, 2]))


def test_exponential_matches_scipy(rock_shelter_model, site_grid):
    ts = sample_series(rock_shelter_model, site_grid, NoiseSpec("multiplicative_lognormal", 0.05), seed=9)
    fit = fit_exponential(ts)
    amp, rate, rss = exponential_lsq(ts.t, ts.values)
    assert fit.model.amplitude == pytest.approx(amp, rel=1e-7)
    assert fit.model.rate == pytest.approx(rate, rel=1e-7)
    assert fit.rss_raw == pytest.approx(rss, rel=1e-10)


# -- piecewise exponential -------------------------------------------------

def two_rate_series(r_early=1e-5, r_late=3e-4, tb=5000.0, step=200.0):
    t = np.arange(50) * step
    late = ExponentialModel(1000.0, r_late)
    early = ExponentialModel(1000.0 * math.exp(-(r_late - r_early) * tb), r_early)
    m = PiecewiseExponentialModel(tb, early=early, late=late)
    return TimeSeries(t, eval_model(m, t)), m


def test_piecewise_recovers_two_rates():
    ts, truth = two_rate_series()
    assert np.sum(ts.t < 5000) == 25 and np.sum(ts.t >= 5000) == 25
    fit = fit_piecewise_exponential(ts)
    assert fit.model.breakpoint == 5000.0
    assert fit.model.early.rate == pytest.approx(1e-5, rel=1e-8)
    assert fit.model.late.rate == pytest.approx(3e-4, rel=1e-8)
    assert fit.p == 5


def test_piecewise_on_single_exponential_is_nested():
    t = np.linspace(0, 10000, 40)
    ts = TimeSeries(t, 50 * np.exp(-2e-4 * t))
    single = fit_exponential(ts)
    pw = fit_piecewise_exponential(ts)
    assert pw.model.early.rate == pytest.approx(single.model.rate, rel=1e-8)
    assert pw.model.late.rate == pytest.approx(single.model.rate, rel=1e-8)
    assert abs(single.rss_raw - pw.rss_raw) <= 1e-18


def test_piecewise_too_few_points():
    with pytest.raises(UnderdeterminedError):
        fit_piecewise_exponential(TimeSeries(np.arange(5.0), np.ones(5)), min_segment=3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 1000.0), min_size=6, max_size=30))
def test_piecewise_never_worse_than_single(values):
    ts = TimeSeries(np.arange(len(values)) * 100.0, values)
    single = fit_exponential(ts)
    pw = fit_piecewise_exponential(ts)
    assert pw.rss_raw <= single.rss_raw * (1 + 1e-12) + 1e-300


# -- bootstrap -------------------------------------------------------------

def test_bootstrap_noiseless_is_degenerate(rock_shelter_series):
    b = bootstrap_parameters(rock_shelter_series, FitConfig(), n_resamples=100, seed=1)
    widths = (np.array(b.upper) - np.array(b.lower)) / np.abs(b.estimate)
    assert np.all(widths <= 1e-6)
    assert b.n_skipped == 0


def test_bootstrap_deterministic_and_thread_independent(rock_shelter_model, site_grid):
    ts = sample_series(rock_shelter_model, site_grid, NoiseSpec("multiplicative_lognormal", 0.05), seed=2)
    cfg = FitConfig(method="reciprocal_ols")
    a = bootstrap_parameters(ts, cfg, 100, seed=42)
    b = bootstrap_parameters(ts, cfg, 100, seed=42)
    c = bootstrap_parameters(ts, cfg, 100, seed=42, n_jobs=4)
    assert a.lower == b.lower == c.lower
    assert a.upper == b.upper == c.upper
    assert bootstrap_parameters(ts, cfg, 100, seed=43).lower != a.lower


def test_bootstrap_minimum_resamples(rock_shelter_series):
    with pytest.raises(ValidationError):
        bootstrap_parameters(rock_shelter_series, FitConfig(), n_resamples=50, seed=0)
