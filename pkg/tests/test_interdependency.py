from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrodispatch.errors import (InsufficientDataError, SingularityError,
                                  ValidationError)
from hydrodispatch.hydrology import Season, generate_synthetic_cascade
from hydrodispatch.interdependency import (align_and_fit, head_partition_compare,
                                           lag_scan, pearson)
from hydrodispatch.series import TimeSeries, series_from_samples

UTC = timezone.utc
T0 = datetime(2020, 1, 1, tzinfo=UTC)


def make_series(values, start=T0):
    pairs = [(start + timedelta(hours=i), v) for i, v in enumerate(values)]
    return TimeSeries.from_pairs(pairs)


class TestPearson:
    def test_self_correlation(self):
        x = np.arange(10.0)
        assert pearson(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_anti_correlation(self):
        x = np.arange(10.0)
        assert pearson(x, -x) == pytest.approx(-1.0, abs=1e-12)

    def test_matches_direct_formula(self):
        x = np.array([3.1, 0.2, -5.0, 8.8, 2.4, 1.1, -0.7, 6.3, 4.4, -2.2])
        y = np.array([1.0, 2.0, -3.5, 7.2, 0.4, 0.9, -1.1, 5.0, 3.3, -0.8])
        expected = float(np.cov(x, y, bias=True)[0, 1] / (x.std() * y.std()))
        assert pearson(x, y) == pytest.approx(expected, abs=1e-12)

    def test_constant_series_undefined(self):
        with pytest.raises(SingularityError):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            pearson([1.0, 2.0], [1.0, 2.0])

    @given(a=st.floats(0.1, 50.0), b=st.floats(-100.0, 100.0))
    @settings(max_examples=50, deadline=None)
    def test_affine_invariance_positive_scale(self, a, b):
        rng = np.random.default_rng(11)
        x = rng.normal(0, 1, 40)
        y = rng.normal(0, 1, 40)
        base = pearson(x, y)
        assert pearson(a * x + b, y) == pytest.approx(base, abs=1e-9)
        assert pearson(x, a * y + b) == pytest.approx(base, abs=1e-9)

    def test_symmetric(self):
        rng = np.random.default_rng(12)
        x, y = rng.normal(0, 1, 30), rng.normal(0, 1, 30)
        assert pearson(x, y) == pearson(y, x)


class TestLagScan:
    def test_noiseless_shift_recovered_for_every_lag(self):
        rng = np.random.default_rng(20)
        base = rng.normal(0, 1, 400).cumsum() + rng.normal(0, 0.5, 400)
        for true_lag in (0, 1, 4, 9, 12):
            up = make_series(base)
            down = make_series(np.roll(base, true_lag)[true_lag:],
                               start=T0 + timedelta(hours=true_lag))
            profile = lag_scan(up, down, max_lag=12)
            assert profile.best_lag == true_lag
            assert profile.correlations[true_lag] == pytest.approx(1.0, abs=1e-9)

    def test_synthetic_cascade_recovery(self):
        c = generate_synthetic_cascade(42, 2000, 2, 0.0)
        up = series_from_samples(c.upstream, "flow")
        down = series_from_samples(c.downstream, "flow")
        profile = lag_scan(up, down, 12, Season.WINTER, "UP", "DOWN")
        assert profile.best_lag == 2
        assert profile.correlations[2] == pytest.approx(1.0, abs=1e-9)

    def test_white_noise_uncorrelated(self):
        rng = np.random.default_rng(21)
        up = make_series(rng.normal(0, 1, 1000))
        down = make_series(rng.normal(0, 1, 1000))
        profile = lag_scan(up, down, max_lag=6)
        assert all(abs(r) < 0.2 for r in profile.correlations.values())

    def test_scaling_downstream_keeps_best_lag(self):
        c = generate_synthetic_cascade(5, 500, 3, 0.02)
        up = series_from_samples(c.upstream, "flow")
        down = series_from_samples(c.downstream, "flow")
        scaled = TimeSeries(down.hours, down.values * 7.5)
        a = lag_scan(up, down, 8)
        b = lag_scan(up, scaled, 8)
        assert a.best_lag == b.best_lag == 3

    def test_insufficient_overlap(self):
        up = make_series(np.arange(30.0))
        down = make_series(np.arange(30.0))
        with pytest.raises(InsufficientDataError):
            lag_scan(up, down, max_lag=12)  # 30 - 12 < 24 overlapping pairs

    def test_tie_breaks_to_smallest_lag(self):
        # constant-plus-alternating series correlate identically at even lags
        x = np.tile([1.0, 2.0], 50)
        up, down = make_series(x), make_series(x)
        profile = lag_scan(up, down, max_lag=6)
        assert profile.correlations[0] == profile.correlations[2] == \
            profile.correlations[4]
        assert profile.best_lag == 0


class TestAlignAndFit:
    def test_exact_half_with_constant_head(self):
        rng = np.random.default_rng(30)
        mw = rng.uniform(100, 900, 300)
        up_mw = make_series(mw)
        up_head = make_series(np.full(300, 294.34))
        down = make_series(0.5 * np.roll(mw, 2)[2:], start=T0 + timedelta(hours=2))
        link = align_and_fit(up_mw, up_head, down, lag=2)
        assert link.mw_coef == pytest.approx(0.5, abs=1e-9)
        assert link.head_coef == 0.0
        assert link.intercept == pytest.approx(0.0, abs=1e-7)
        assert link.r_squared == pytest.approx(1.0, abs=1e-9)

    def test_known_coefficients_within_three_standard_errors(self):
        rng = np.random.default_rng(31)
        n = 2000
        mw = rng.uniform(200, 800, n)
        head = rng.uniform(280, 330, n)
        noise = rng.normal(0, 5.0, n)
        down_vals = 10.0 + 0.4 * mw + 0.02 * head + noise
        up_mw = make_series(mw)
        up_head = make_series(head)
        down = make_series(down_vals)
        link = align_and_fit(up_mw, up_head, down, lag=0)

        # standard errors from the classic OLS covariance estimate
        design = np.column_stack([np.ones(n), mw, head])
        resid = down_vals - design @ np.array([link.intercept, link.mw_coef,
                                               link.head_coef])
        sigma2 = resid @ resid / (n - 3)
        cov = sigma2 * np.linalg.inv(design.T @ design)
        se = np.sqrt(np.diag(cov))
        for got, true, s in zip((link.intercept, link.mw_coef, link.head_coef),
                                (10.0, 0.4, 0.02), se):
            assert abs(got - true) <= 3 * s

    def test_constant_upstream_mw_is_singular(self):
        up_mw = make_series(np.full(300, 400.0))
        up_head = make_series(np.linspace(280, 330, 300))
        down = make_series(np.linspace(100, 300, 300))
        with pytest.raises(SingularityError):
            align_and_fit(up_mw, up_head, down, lag=0)

    def test_insufficient_overlap(self):
        up = make_series(np.arange(40.0))
        head = make_series(np.full(40, 300.0))
        down = make_series(np.arange(40.0))
        with pytest.raises(InsufficientDataError):
            align_and_fit(up, head, down, lag=0)


class TestHeadPartition:
    def test_two_buckets_two_records(self):
        rng = np.random.default_rng(40)
        n = 400
        head = np.concatenate([np.full(n, 294.34), np.full(n, 322.45)])
        mw = rng.uniform(100, 900, 2 * n)
        down = np.where(head < 300, 0.3 * mw, 0.6 * mw)
        buckets = [(290.0, 300.0), (320.0, 325.0)]
        out = head_partition_compare(mw, head, down, buckets)
        assert len(out) == 2
        assert out[0].n_samples == n and out[1].n_samples == n

    def test_single_bucket_rejected(self):
        with pytest.raises(ValidationError):
            head_partition_compare([1.0], [1.0], [1.0], [(0.0, 10.0)])

    def test_bucket_dependent_slopes_recovered(self):
        rng = np.random.default_rng(41)
        n = 500
        head = np.concatenate([rng.uniform(290, 295, n), rng.uniform(320, 325, n)])
        mw = rng.uniform(100, 900, 2 * n)
        slope = np.where(head < 300, 0.3, 0.6)
        down = slope * mw + rng.normal(0, 3.0, 2 * n)
        out = head_partition_compare(mw, head, down,
                                     [(290.0, 300.0), (318.0, 326.0)])
        assert out[0].slope == pytest.approx(0.3, abs=0.02)
        assert out[1].slope == pytest.approx(0.6, abs=0.02)
        assert out[1].slope > out[0].slope

    def test_underpopulated_bucket_excluded_with_warning(self):
        rng = np.random.default_rng(42)
        n = 200
        head = np.concatenate([np.full(n, 294.0), np.full(n, 322.0),
                               np.full(3, 350.0)])
        mw = rng.uniform(100, 900, 2 * n + 3)
        down = 0.5 * mw
        with pytest.warns(UserWarning, match="excluded"):
            out = head_partition_compare(
                mw, head, down,
                [(290.0, 300.0), (320.0, 325.0), (345.0, 355.0)])
        assert len(out) == 2
