"""Tests for conformal score collection and radius calibration."""

import math

import numpy as np
import pytest

from icpnav.conformal import (
    ConformalRadii,
    ScoreSet,
    conformal_radii,
    empirical_coverage,
    horizon_coverage,
    min_sample_count,
    score_dataset,
)
from icpnav.orca import CalibrationDataset
from icpnav.prediction import ConstantVelocityPredictor, ObservationWindow


def make_dataset(rng, m=4, n=3, t_obs=5, t_pred=5, velocity_scale=1.0):
    """Random dataset of straight-line observations with noisy futures."""
    starts = rng.uniform(-5, 5, size=(m, n, 1, 2))
    vels = rng.uniform(-velocity_scale, velocity_scale, size=(m, n, 1, 2))
    steps = np.arange(t_obs)[None, None, :, None] * 0.25
    obs = starts + vels * steps
    fut_steps = (t_obs + np.arange(t_pred))[None, None, :, None] * 0.25
    future = starts + vels * fut_steps + rng.normal(0, 0.1, size=(m, n, t_pred, 2))
    return CalibrationDataset(
        robot_obs=None, human_obs=obs, human_future=future, dt=0.25
    )


class TestScoreDataset:
    @staticmethod
    def cv_ideal_futures(data, t_pred=5):
        """Futures lying exactly on the constant-velocity extrapolation."""
        predictor = ConstantVelocityPredictor()
        return np.stack(
            [
                predictor.predict(
                    ObservationWindow(
                        human_positions=data.human_obs[i], robot_positions=None, dt=data.dt
                    ),
                    t_pred,
                ).positions
                for i in range(data.n_samples)
            ]
        )

    def test_perfect_predictor_scores_zero(self):
        rng = np.random.default_rng(0)
        data = make_dataset(rng, velocity_scale=0.8)
        exact = CalibrationDataset(
            robot_obs=None,
            human_obs=data.human_obs,
            human_future=self.cv_ideal_futures(data),
            dt=0.25,
        )
        scores = score_dataset(exact, ConstantVelocityPredictor())
        np.testing.assert_allclose(scores.scores, 0.0, atol=1e-12)

    def test_constant_offset_gives_constant_scores(self):
        rng = np.random.default_rng(1)
        m, n, t_pred = 3, 2, 5
        data = make_dataset(rng, m=m, n=n, t_pred=t_pred)
        predictor = ConstantVelocityPredictor()
        ideal = self.cv_ideal_futures(data, t_pred)
        shifted = CalibrationDataset(
            robot_obs=None,
            human_obs=data.human_obs,
            human_future=ideal + np.array([0.3, 0.4]),
            dt=0.25,
        )
        scores = score_dataset(shifted, predictor)
        np.testing.assert_allclose(scores.scores, 0.5, atol=1e-12)
        assert scores.n_samples == m * n

    def test_matches_bruteforce_loop(self):
        rng = np.random.default_rng(2)
        data = make_dataset(rng, m=5, n=3)
        predictor = ConstantVelocityPredictor()
        scores = score_dataset(data, predictor)

        expected = []
        for mi in range(data.n_samples):
            window = ObservationWindow(
                human_positions=data.human_obs[mi], robot_positions=None, dt=data.dt
            )
            pred = predictor.predict(window, 5).positions
            for hi in range(data.n_humans):
                errs = [
                    math.dist(pred[hi, t], data.human_future[mi, hi, t]) for t in range(5)
                ]
                expected.append(errs)
        expected = np.array(expected).T
        np.testing.assert_allclose(scores.scores, expected, atol=1e-12)


class TestConformalRadii:
    def test_zero_scores_give_zero_radii(self):
        scores = ScoreSet(scores=np.zeros((5, 30)))
        radii = conformal_radii(scores, alpha=0.05)
        np.testing.assert_array_equal(radii.radii, np.zeros(5))
        assert radii.sample_count == 30

    def test_quantile_on_integers(self):
        # n=19 scores 1..19 at alpha 0.05 -> index ceil(20*0.95)=19 -> radius 19
        scores = ScoreSet(scores=np.arange(1.0, 20.0)[None, :])
        radii = conformal_radii(scores, alpha=0.05)
        assert radii.radii[0] == 19.0

    def test_quantile_matches_sorted_oracle(self):
        rng = np.random.default_rng(3)
        draws = rng.uniform(size=99)
        scores = ScoreSet(scores=draws[None, :])
        radii = conformal_radii(scores, alpha=0.1)
        # index ceil(100*0.9) = 90 -> 90th smallest
        expected = sorted(draws.tolist())[89]
        assert radii.radii[0] == expected

    def test_rules_differ_where_expected(self):
        # n=20, alpha=0.05: finite-sample index 20, empirical index 19.
        rng = np.random.default_rng(4)
        draws = np.sort(rng.uniform(size=20))
        scores = ScoreSet(scores=draws[None, :])
        finite = conformal_radii(scores, alpha=0.05, quantile_rule="finite_sample")
        empirical = conformal_radii(scores, alpha=0.05, quantile_rule="empirical")
        assert finite.radii[0] == draws[19]
        assert empirical.radii[0] == draws[18]

    def test_insufficient_samples_error_names_minimum(self):
        scores = ScoreSet(scores=np.ones((5, 10)))
        with pytest.raises(ValueError, match="at least 19"):
            conformal_radii(scores, alpha=0.05)
        assert min_sample_count(0.05) == 19

    def test_alpha_validation(self):
        scores = ScoreSet(scores=np.ones((1, 30)))
        with pytest.raises(ValueError, match="alpha"):
            conformal_radii(scores, alpha=0.0)
        with pytest.raises(ValueError, match="quantile rule"):
            conformal_radii(scores, alpha=0.5, quantile_rule="median")

    def test_radii_monotone_in_alpha(self):
        rng = np.random.default_rng(5)
        scores = ScoreSet(scores=rng.exponential(size=(5, 200)))
        alphas = [0.01, 0.05, 0.1, 0.2, 0.4]
        radii = [conformal_radii(scores, a).radii for a in alphas]
        for lo, hi in zip(radii[1:], radii[:-1]):
            assert np.all(lo <= hi)

    def test_per_step_independence(self):
        rng = np.random.default_rng(6)
        scores = rng.uniform(size=(3, 50))
        combined = conformal_radii(ScoreSet(scores=scores), alpha=0.1)
        for t in range(3):
            single = conformal_radii(ScoreSet(scores=scores[t : t + 1]), alpha=0.1)
            assert combined.radii[t] == single.radii[0]


class TestCoverage:
    def test_trivial_coverages(self):
        radii = ConformalRadii(radii=np.array([1.0, 1.0]), alpha=0.1, sample_count=10)
        inside = np.full((2, 10), 0.5)
        outside = np.full((2, 10), 2.0)
        np.testing.assert_array_equal(empirical_coverage(radii, inside), [1.0, 1.0])
        np.testing.assert_array_equal(empirical_coverage(radii, outside), [0.0, 0.0])
        assert horizon_coverage(radii, inside) == 1.0
        assert horizon_coverage(radii, outside) == 0.0

    def test_strict_and_non_strict_differ_on_ties(self):
        radii = ConformalRadii(radii=np.array([1.0]), alpha=0.1, sample_count=10)
        ties = np.full((1, 4), 1.0)
        assert empirical_coverage(radii, ties)[0] == 1.0
        assert empirical_coverage(radii, ties, strict=True)[0] == 0.0

    def test_step_count_mismatch_raises(self):
        radii = ConformalRadii(radii=np.ones(3), alpha=0.1, sample_count=10)
        with pytest.raises(ValueError, match="do not match"):
            empirical_coverage(radii, np.ones((2, 5)))

    def test_rank_statistic_probability(self):
        """P(X <= X_(k)) = k/(n+1) for iid continuous draws."""
        rng = np.random.default_rng(7)
        n, k, trials = 19, 10, 20000
        draws = rng.uniform(size=(trials, n + 1))
        kth = np.sort(draws[:, :n], axis=1)[:, k - 1]
        hit_rate = float((draws[:, n] <= kth).mean())
        assert hit_rate == pytest.approx(k / (n + 1), abs=0.02)

    @pytest.mark.parametrize(
        "sampler",
        [
            lambda rng, size: rng.uniform(size=size),
            lambda rng, size: rng.exponential(size=size),
            lambda rng, size: np.abs(
                np.where(rng.uniform(size=size) < 0.5, rng.normal(1, 0.1, size), rng.normal(5, 0.5, size))
            ),
        ],
        ids=["uniform", "exponential", "bimodal"],
    )
    def test_marginal_coverage_guarantee(self, sampler):
        """Mean coverage over fresh calibration/test splits stays above
        1 - alpha within Monte-Carlo tolerance."""
        rng = np.random.default_rng(8)
        alpha, n_cal, n_test, reps = 0.1, 200, 2000, 120
        coverages = []
        for _ in range(reps):
            cal = sampler(rng, (1, n_cal))
            test = sampler(rng, (1, n_test))
            radii = conformal_radii(ScoreSet(scores=cal), alpha=alpha)
            coverages.append(empirical_coverage(radii, test)[0])
        sigma_binomial = math.sqrt(alpha * (1 - alpha) / n_test)
        assert np.mean(coverages) >= 1 - alpha - 3 * sigma_binomial

    def test_whole_horizon_coverage_bound(self):
        """Joint coverage of the horizon is at least 1 - alpha*t_pred."""
        rng = np.random.default_rng(9)
        alpha, t_pred, n_cal, n_test = 0.05, 5, 400, 4000
        cal = rng.exponential(size=(t_pred, n_cal))
        test = rng.exponential(size=(t_pred, n_test))
        radii = conformal_radii(ScoreSet(scores=cal), alpha=alpha)
        joint = horizon_coverage(radii, test)
        sigma = math.sqrt(alpha * t_pred * (1 - alpha * t_pred) / n_test)
        assert joint >= 1 - alpha * t_pred - 3 * sigma
