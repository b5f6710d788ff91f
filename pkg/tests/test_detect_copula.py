from __future__ import annotations

import numpy as np
import pytest

from trackscreen.detectors import DetectorConfig, run_detector
from trackscreen.detectors.copula import CopulaModel, copula_fit, fit_and_cut

from conftest import gaussian_histories, make_history


def gaussian_copula_sample(R: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.multivariate_normal(np.zeros(R.shape[0]), R, size=n)
    return z  # any monotone marginal transform leaves the copula unchanged


class TestFit:
    def test_independent_features_near_identity(self):
        rng = np.random.default_rng(0)
        X = rng.random((1000, 3))
        model = copula_fit(X)
        off_diag = model.correlation[~np.eye(3, dtype=bool)]
        assert np.max(np.abs(off_diag)) < 0.1

    def test_comonotone_pair_correlation_near_one(self):
        rng = np.random.default_rng(1)
        a = rng.random(1000)
        X = np.column_stack([a, a**3, rng.random(1000)])  # identical ordering
        model = copula_fit(X)
        assert model.correlation[0, 1] >= 0.99

    def test_constant_column_degenerate_but_fit_succeeds(self):
        rng = np.random.default_rng(2)
        a = rng.random(500)
        X = np.column_stack([a, 2.0 * a + rng.normal(0, 0.1, 500), np.full(500, 0.16)])
        model = copula_fit(X)
        assert model.degenerate_features == (2,)
        assert model.correlation[2, 2] == 1.0
        assert np.all(model.correlation[2, :2] == 0.0)
        assert model.correlation[0, 1] > 0.9

    def test_minimum_rows_enforced(self):
        with pytest.raises(ValueError):
            copula_fit(np.random.default_rng(0).random((49, 3)))

    def test_correlation_recovery_at_scale(self):
        R = np.array([[1.0, 0.6, -0.3], [0.6, 1.0, 0.2], [-0.3, 0.2, 1.0]])
        rng = np.random.default_rng(3)
        X = gaussian_copula_sample(R, 10_000, rng)
        model = copula_fit(X)
        assert np.max(np.abs(model.correlation - R)) < 0.05


class TestDensity:
    def test_identity_correlation_zero_density(self):
        rng = np.random.default_rng(4)
        X = rng.random((500, 3))
        model = copula_fit(X)
        model.correlation = np.eye(3)
        density = model.log_density(X)
        assert np.max(np.abs(density)) < 1e-9

    def test_flagged_fraction_matches_quantile(self):
        rng = np.random.default_rng(5)
        R = np.array([[1.0, 0.7, 0.0], [0.7, 1.0, 0.0], [0.0, 0.0, 1.0]])
        X = gaussian_copula_sample(R, 1000, rng)
        _, _, flags = fit_and_cut(X, 0.05)
        assert abs(int(flags.sum()) - 50) <= 1

    def test_dependence_violation_flagged(self):
        # strong positive (time, wind) dependence; a point with extreme-high u1
        # and extreme-low u2 breaks the pattern and lands in the bottom tail
        rng = np.random.default_rng(6)
        R = np.array([[1.0, 0.8, 0.0], [0.8, 1.0, 0.0], [0.0, 0.0, 1.0]])
        X = gaussian_copula_sample(R, 999, rng)
        violation = np.array([[np.quantile(X[:, 0], 0.995), np.quantile(X[:, 1], 0.003), 0.0]])
        X_all = np.vstack([X, violation])
        model, scores, flags = fit_and_cut(X_all, 0.05)
        assert flags[-1]

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(7)
        R = np.array([[1.0, 0.5, 0.2], [0.5, 1.0, -0.3], [0.2, -0.3, 1.0]])
        X = gaussian_copula_sample(R, 800, rng)
        _, scores_a, flags_a = fit_and_cut(X, 0.05)
        X_cubed = X.copy()
        X_cubed[:, 1] = X_cubed[:, 1] ** 3  # strictly monotone on all reals
        _, scores_b, flags_b = fit_and_cut(X_cubed, 0.05)
        assert np.array_equal(flags_a, flags_b)
        assert np.allclose(scores_a, scores_b)


class TestDetector:
    def test_skips_when_too_few_complete_rows(self, config):
        histories = [make_history(f"A{i}", [10.0, 10.1, 10.2]) for i in range(5)]  # no wind/reaction
        result = run_detector("copula", histories, config)
        assert result.athletes_flagged == frozenset()
        assert any("complete rows" in w for w in result.warnings)
        assert all(e.explanation in ("missing_features", "not_scored") for e in result.entries)

    def test_incomplete_rows_marked_not_flagged(self, config):
        complete = gaussian_histories(20, 8, seed=9, complete_features=True)
        partial = make_history("ZZZZ", [10.0, 10.1, 10.2])  # wind/reaction missing
        result = run_detector("copula", complete + [partial], config)
        partial_entries = [e for e in result.entries if e.athlete_id == "ZZZZ"]
        assert all(e.explanation == "missing_features" and not e.flagged for e in partial_entries)

    def test_flag_count_on_training_rows(self, config, feature_histories):
        result = run_detector("copula", feature_histories, config)
        scored = [e for e in result.entries if e.score is not None]
        flagged = [e for e in scored if e.flagged]
        assert abs(len(flagged) - round(0.05 * len(scored))) <= 1
