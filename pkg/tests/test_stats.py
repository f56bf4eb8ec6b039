"""Tests for the shared statistical checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phi4well.stats import (
    RateFit,
    SampleSummary,
    exp_cdf,
    exp_rate_fit,
    ks_statistic,
    poisson_dispersion,
    summarize,
)


class TestSampleSummary:
    def test_summarize_basic(self):
        s = summarize([3.0, 1.0, 2.0], censored=[False, True, False])
        assert s.count == 3
        assert s.mean == pytest.approx(2.0)
        assert s.variance == pytest.approx(1.0)
        assert s.sorted_values.tolist() == [1.0, 2.0, 3.0]
        assert s.censored_count == 1

    def test_single_sample_has_zero_variance(self):
        assert summarize([4.2]).variance == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            summarize([])
        with pytest.raises(ValueError):
            summarize([np.inf])
        with pytest.raises(ValueError):
            SampleSummary(
                count=0, mean=0.0, variance=0.0,
                sorted_values=np.empty(0), censored_count=0,
            )
        with pytest.raises(ValueError):
            SampleSummary(
                count=1, mean=0.0, variance=-1.0,
                sorted_values=np.zeros(1), censored_count=0,
            )


class TestKsStatistic:
    def test_single_sample_at_reference_median(self):
        # F(ln 2) = 1/2 under Exp(1): the empirical jump from 0 to 1 leaves
        # a gap of exactly 1/2 on both sides
        assert ks_statistic([math.log(2.0)], exp_cdf(1.0)) == pytest.approx(0.5)

    def test_optimally_stacked_quantiles(self):
        for n in (1, 7, 100):
            ranks = (np.arange(1, n + 1) - 0.5) / n
            samples = -np.log1p(-ranks)  # Exp(1) quantiles
            d = ks_statistic(samples, exp_cdf(1.0))
            assert d == pytest.approx(1.0 / (2.0 * n), rel=1e-12)

    def test_exp_draws_meet_critical_value(self):
        # 1.36/sqrt(n) is the 95% KS critical value; allow the nominal 5%
        # of seeds to exceed it with binomial slack
        crit = 1.36 / math.sqrt(2000.0)
        failures = 0
        for seed in range(100):
            draws = np.random.default_rng(seed).exponential(0.5, size=2000)
            failures += ks_statistic(draws, exp_cdf(2.0)) > crit
        assert failures <= 10

    def test_monotone_transform_invariance(self):
        draws = np.random.default_rng(8).exponential(1.0, size=500)
        base = ks_statistic(draws, exp_cdf(1.0))
        squared = ks_statistic(draws**2, lambda t: exp_cdf(1.0)(np.sqrt(t)))
        affine = ks_statistic(3.0 * draws + 1.0, lambda t: exp_cdf(1.0)((t - 1.0) / 3.0))
        assert squared == pytest.approx(base, rel=1e-12)
        assert affine == pytest.approx(base, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            ks_statistic([], exp_cdf(1.0))
        with pytest.raises(ValueError):
            ks_statistic([1.0, np.nan], exp_cdf(1.0))
        with pytest.raises(ValueError):
            exp_cdf(0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40))
    def test_bounded_on_unit_interval(self, xs):
        d = ks_statistic(xs, lambda t: np.clip(t, 0.0, 1.0))
        assert 0.0 <= d <= 1.0


class TestPoissonDispersion:
    def test_constant_counts(self):
        assert poisson_dispersion([3, 3, 3]) == 0.0

    def test_alternating_counts(self):
        assert poisson_dispersion([0, 1, 0, 1]) == pytest.approx(2.0 / 3.0, rel=1e-15)

    def test_all_zero_is_undefined_not_one(self):
        assert math.isnan(poisson_dispersion([0, 0, 0, 0]))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        counts = rng.poisson(2.0, size=64)
        shuffled = rng.permutation(counts)
        assert poisson_dispersion(counts) == poisson_dispersion(shuffled)

    def test_poisson_draws_near_unit_dispersion(self):
        for seed in range(30):
            counts = np.random.default_rng(seed).poisson(1.0, size=10_000)
            assert 0.9 <= poisson_dispersion(counts) <= 1.1

    def test_validation(self):
        with pytest.raises(ValueError):
            poisson_dispersion([])
        with pytest.raises(ValueError):
            poisson_dispersion([1, -1])
        with pytest.raises(ValueError):
            poisson_dispersion([0.5, 1.5])


class TestExpRateFit:
    def test_unit_sample(self):
        fit = exp_rate_fit([1.0, 1.0, 1.0])
        assert fit.rate == 1.0
        assert fit.defined
        assert fit.events == 3
        assert fit.exposure == 3.0

    def test_two_point_sample(self):
        assert exp_rate_fit([0.5, 1.5]).rate == 1.0

    def test_censoring_enters_through_exposure(self):
        fit = exp_rate_fit([2.0, 2.0, 2.0, 5.0], censored=[False, False, False, True])
        assert fit.rate == pytest.approx(3.0 / 11.0, rel=1e-15)
        assert fit.events == 3
        assert fit.exposure == 11.0

    def test_all_censored_is_undefined(self):
        fit = exp_rate_fit([4.0, 4.0], censored=[True, True])
        assert not fit.defined
        assert math.isnan(fit.rate)
        assert all(math.isnan(v) for v in fit.ci)
        assert fit.events == 0
        assert fit.exposure == 8.0

    def test_power_of_two_rescaling_is_exact(self):
        draws = np.random.default_rng(2).exponential(0.7, size=100)
        base = exp_rate_fit(draws, seed=9)
        doubled = exp_rate_fit(2.0 * draws, seed=9)
        assert doubled.rate == base.rate / 2.0
        assert doubled.ci == (base.ci[0] / 2.0, base.ci[1] / 2.0)

    def test_general_rescaling(self):
        draws = np.random.default_rng(2).exponential(0.7, size=100)
        base = exp_rate_fit(draws, seed=9)
        scaled = exp_rate_fit(3.7 * draws, seed=9)
        assert scaled.rate == pytest.approx(base.rate / 3.7, rel=1e-12)
        assert scaled.ci[0] == pytest.approx(base.ci[0] / 3.7, rel=1e-9)
        assert scaled.ci[1] == pytest.approx(base.ci[1] / 3.7, rel=1e-9)

    def test_interval_brackets_the_estimate(self):
        draws = np.random.default_rng(4).exponential(0.5, size=200)
        fit = exp_rate_fit(draws, seed=1)
        assert fit.ci[0] < fit.rate < fit.ci[1]

    def test_rate_sampling_distribution(self):
        hits = 0
        for seed in range(40):
            draws = np.random.default_rng(seed).exponential(0.5, size=2000)
            hits += 1.9 <= exp_rate_fit(draws, n_boot=10, seed=seed).rate <= 2.1
        assert hits >= 36

    def test_interval_coverage(self):
        covered = 0
        for seed in range(40):
            draws = np.random.default_rng(seed).exponential(1.0 / 1.5, size=200)
            lo, hi = exp_rate_fit(draws, seed=seed).ci
            covered += lo <= 1.5 <= hi
        assert covered >= 33

    def test_bootstrap_is_seeded(self):
        draws = np.random.default_rng(7).exponential(1.0, size=50)
        assert exp_rate_fit(draws, seed=3) == exp_rate_fit(draws, seed=3)
        assert exp_rate_fit(draws, seed=3).ci != exp_rate_fit(draws, seed=4).ci

    def test_validation(self):
        with pytest.raises(ValueError):
            exp_rate_fit([])
        with pytest.raises(ValueError):
            exp_rate_fit([1.0, 0.0])
        with pytest.raises(ValueError):
            exp_rate_fit([1.0], censored=[True, False])
        with pytest.raises(ValueError):
            exp_rate_fit([1.0], ci_level=1.0)

    @settings(max_examples=30, deadline=None)
    @given(
        st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=30),
        st.sampled_from([0.25, 0.5, 2.0, 8.0]),
    )
    def test_rescaling_property(self, xs, c):
        base = exp_rate_fit(xs, n_boot=20, seed=0)
        scaled = exp_rate_fit(c * np.asarray(xs), n_boot=20, seed=0)
        assert scaled.rate == pytest.approx(base.rate / c, rel=1e-12)

    def test_result_type(self):
        assert isinstance(exp_rate_fit([1.0]), RateFit)
