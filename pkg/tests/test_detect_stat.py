from __future__ import annotations

import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trackscreen.detectors import DetectorConfig, run_detector
from trackscreen.detectors.statistical import (
    compute_baseline,
    excess_scores,
    iqr_exceedance,
    mad_scores,
    tukey_hinges,
    zscore_scores,
)
from trackscreen.oracle import oracle_excess_scores

from conftest import make_history


def arr(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)


class TestBaseline:
    def test_tukey_hinges_odd(self):
        # median excluded: lower half [10, 11] -> 10.5, upper [13, 14] -> 13.5
        q1, q3 = tukey_hinges(arr([10, 11, 12, 13, 14]))
        assert (q1, q3) == (10.5, 13.5)

    def test_tukey_hinges_even(self):
        q1, q3 = tukey_hinges(arr([10, 11, 12, 13, 14, 20]))
        assert (q1, q3) == (11.0, 14.0)

    def test_sample_std(self):
        baseline = compute_baseline(arr([10.0, 10.1, 10.2, 10.1, 10.0]))
        # hand: mean 10.08, SS=0.028, var=0.028/4
        assert baseline.mean == pytest.approx(10.08)
        assert baseline.std == pytest.approx(math.sqrt(0.028 / 4))
        assert baseline.q1 <= baseline.median <= baseline.q3


class TestZScore:
    def test_center_point_not_flagged(self):
        z, flags, _ = zscore_scores(arr([10.0, 10.1, 10.2, 10.1, 10.0]), 3.0)
        # x=10.1: z = 0.02 / 0.08366 ~ 0.239
        assert z[1] == pytest.approx(0.239, abs=5e-4)
        assert not flags.any()

    def test_constant_series_no_flags(self):
        z, flags, _ = zscore_scores(arr([10.0] * 5), 3.0)
        assert np.all(z == 0.0)
        assert not flags.any()


class TestMad:
    def test_degenerate_mad_no_flags(self):
        _, flags, baseline = mad_scores(arr([10, 10, 10, 10, 20]), 3.5, 0.6745)
        assert baseline.mad == 0.0
        assert not flags.any()

    def test_clear_outlier_flagged(self):
        # median 10.2, MAD 0.1, z*(12.0) = 0.6745*1.8/0.1 = 12.141
        z, flags, _ = mad_scores(arr([10.0, 10.1, 10.2, 10.3, 12.0]), 3.5, 0.6745)
        assert z[-1] == pytest.approx(12.141, abs=1e-3)
        assert list(flags) == [False, False, False, False, True]

    def test_degenerate_explanation_recorded(self, config):
        history = make_history("A1", [10.0, 10.0, 10.0, 10.0, 20.0])
        result = run_detector("mad", [history], config)
        assert all(e.explanation == "degenerate_mad" for e in result.entries)

    def test_breakdown_single_corruption(self):
        # corrupting one non-median point changes at most that point's flag
        base = arr([10.0, 10.1, 10.2, 10.3, 10.4, 10.5, 10.6])
        _, before, _ = mad_scores(base, 3.5, 0.6745)
        corrupted = base.copy()
        corrupted[-1] = 1e6
        _, after, _ = mad_scores(corrupted, 3.5, 0.6745)
        assert int(np.sum(before != after)) <= 1

    def test_matches_gaussian_z_within_quantile_band(self):
        # the 0.6745 factor rescales MAD to sd under normality
        rng = np.random.default_rng(99)
        values = rng.standard_normal(200_000)
        z, _, _ = zscore_scores(values, 3.0)
        zm, _, _ = mad_scores(values, 3.5, 0.6745)
        for q in (0.5, 0.9, 0.99):
            a = np.quantile(np.abs(z), q)
            b = np.quantile(np.abs(zm), q)
            assert abs(a - b) / a < 0.05


class TestIqr:
    def test_no_flags_inside_fences(self):
        _, flags, _ = iqr_exceedance(arr([10, 11, 12, 13, 14]), 1.5)
        assert not flags.any()

    def test_constant_series(self):
        exceed, flags, baseline = iqr_exceedance(arr([10.0] * 5), 1.5)
        assert baseline.iqr == 0.0
        assert not flags.any()

    def test_far_point_flagged(self):
        # fences from Q1=11, Q3=14: high fence 18.5 < 20
        exceed, flags, _ = iqr_exceedance(arr([10, 11, 12, 13, 14, 20]), 1.5)
        assert list(flags) == [False] * 5 + [True]
        assert exceed[-1] == pytest.approx(20 - 18.5)


class TestExcess:
    def test_fast_point_scored_not_flagged(self):
        # EP(9.9) computed including the point itself: -1.730 > -2.5
        values = [10.5, 10.6, 10.4, 10.5, 9.9]
        ep, flags, _ = excess_scores(arr(values), -2.5)
        frozen = oracle_excess_scores(values)
        assert ep[-1] == pytest.approx(frozen[-1], abs=1e-9)
        assert round(float(ep[-1]), 3) == -1.730
        assert not flags.any()

    def test_one_sided_ignores_slow_outlier(self):
        ep, flags, _ = excess_scores(arr([10.5, 10.6, 10.4, 10.5, 11.1]), -2.5)
        assert ep[-1] > 0
        assert not flags.any()

    def test_constant_series(self):
        _, flags, _ = excess_scores(arr([10.5] * 6), -2.5)
        assert not flags.any()

    def test_strongly_fast_point_flagged(self):
        # |EP| is bounded by (n-1)/sqrt(n), so a lone fast mark needs a long history
        values = [10.50, 10.52, 10.48, 10.51, 10.49, 10.50, 10.52, 10.48, 10.51, 10.49, 10.50, 9.6]
        ep, flags, _ = excess_scores(arr(values), -2.5)
        assert flags[-1]
        assert not flags[:-1].any()


class TestProperties:
    @given(
        shift=st.floats(min_value=-50, max_value=50),
        scale=st.floats(min_value=0.01, max_value=100),
        seed=st.integers(min_value=0, max_value=2**16),
    )
    @settings(max_examples=50, deadline=None)
    def test_affine_invariance(self, shift, scale, seed):
        rng = np.random.default_rng(seed)
        values = rng.normal(11.0, 0.5, size=12)
        transformed = values * scale + shift
        _, f1, _ = zscore_scores(values, 3.0)
        _, f2, _ = zscore_scores(transformed, 3.0)
        assert list(f1) == list(f2)
        _, e1, _ = excess_scores(values, -2.5)
        _, e2, _ = excess_scores(transformed, -2.5)
        assert list(e1) == list(e2)

    @given(seed=st.integers(min_value=0, max_value=2**16))
    @settings(max_examples=30, deadline=None)
    def test_flagged_subset_of_scored_and_finite(self, seed):
        rng = np.random.default_rng(seed)
        values = rng.normal(11.0, 0.3, size=10)
        for fn in (lambda v: zscore_scores(v, 3.0),
                   lambda v: mad_scores(v, 3.5, 0.6745),
                   lambda v: iqr_exceedance(v, 1.5),
                   lambda v: excess_scores(v, -2.5)):
            scores, flags, _ = fn(values)
            assert np.all(np.isfinite(scores))
            assert flags.shape == scores.shape


class TestCalibration:
    def test_zscore_gaussian_flag_rate(self):
        # long histories make in-sample estimation negligible; two-sided
        # 3-sigma rule flags ~0.27% of draws
        rng = np.random.default_rng(512)
        total = 0
        flagged = 0
        for _ in range(200):
            values = rng.standard_normal(5000)
            _, flags, _ = zscore_scores(values, 3.0)
            total += values.size
            flagged += int(flags.sum())
        rate = flagged / total
        assert 0.0025 <= rate <= 0.0035
