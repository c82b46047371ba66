"""Temperature calibration against dense-grid and analytic oracles."""

import math

import numpy as np
import pytest

from semtest.calibrate import (
    DEFAULT_LAMBDA_MAX,
    DEFAULT_TARGET,
    CalibrationSet,
    calibrate_lambda,
    null_e_mean,
)
from semtest.errors import ConfigError, NoFeasibleLambdaError
from semtest.rng import master_rng


class TestNullEMean:
    def test_zero_temperature_is_one(self):
        scores = master_rng(0).standard_normal(100)
        assert null_e_mean(0.0, scores) == pytest.approx(1.0)

    def test_constant_scores(self):
        scores = np.full(10, 0.5)
        assert null_e_mean(2.0, scores) == pytest.approx(math.exp(-1.0))

    def test_vectorized_lambda(self):
        scores = np.array([0.1, 0.4])
        lams = np.array([0.5, 1.0, 2.0])
        out = null_e_mean(lams, scores)
        expected = [0.5 * (math.exp(-l * 0.1) + math.exp(-l * 0.4)) for l in lams]
        np.testing.assert_allclose(out, expected, rtol=1e-12)

    def test_convex_in_lambda(self):
        scores = master_rng(1).normal(0.3, 0.2, size=500)
        grid = np.linspace(0.0, 20.0, 101)
        e = null_e_mean(grid, scores)
        second_diff = e[2:] - 2 * e[1:-1] + e[:-2]
        assert np.all(second_diff >= -1e-12)


class TestCalibrateLambda:
    def test_all_feasible_returns_lambda_max(self):
        # Constant positive scores: E_hat(lam) = exp(-lam/2) <= 0.98 for all
        # lam >= 2 ln(1/0.98) = 0.040405, so the whole upper range is feasible.
        cal = CalibrationSet(np.full(50, 0.5))
        assert calibrate_lambda(cal) == DEFAULT_LAMBDA_MAX
        assert calibrate_lambda(cal, lam_max=7.5) == 7.5
        assert 2 * math.log(1 / DEFAULT_TARGET) == pytest.approx(0.040405, abs=1e-6)

    def test_symmetric_scores_infeasible(self):
        # E_hat(lam) = cosh(lam) >= 1 everywhere.
        with pytest.raises(NoFeasibleLambdaError):
            calibrate_lambda(CalibrationSet(np.array([1.0, -1.0])))

    def test_all_negative_scores_infeasible(self):
        with pytest.raises(NoFeasibleLambdaError):
            calibrate_lambda(CalibrationSet(np.array([-0.5, -0.1])))

    def test_analytic_crossing(self):
        # Scores {a - 1, a + 1}: E_hat(lam) = exp(-a lam) cosh(lam), which
        # dips below the target and comes back up.  Find the upper crossing
        # with an independent bisection on the analytic expression.
        a = 0.5
        scores = np.array([a - 1.0, a + 1.0])
        lam = calibrate_lambda(CalibrationSet(scores))

        def e_hat(l):
            return math.exp(-a * l) * math.cosh(l)

        lo, hi = 1.0, 100.0
        assert e_hat(lo) < 0.98 < e_hat(hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if e_hat(mid) <= 0.98:
                lo = mid
            else:
                hi = mid
        assert lam == pytest.approx(lo, rel=1e-5)

    def test_dense_grid_oracle(self):
        scores = master_rng(3).normal(0.25, 0.4, size=2000)
        cal = CalibrationSet(scores)
        lam = calibrate_lambda(cal)
        grid = np.logspace(-8, 2, 100_000)
        feasible = grid[null_e_mean(grid, scores) <= cal.target]
        assert feasible.size > 0
        best = feasible.max()
        assert lam >= best * (1 - 1e-3)
        assert null_e_mean(lam, scores) <= cal.target + 1e-12

    def test_returned_lambda_is_feasible(self):
        rng = master_rng(4)
        for _ in range(20):
            mu = rng.uniform(0.1, 0.5)
            sd = rng.uniform(0.05, 0.6)
            scores = rng.normal(mu, sd, size=400)
            cal = CalibrationSet(scores)
            try:
                lam = calibrate_lambda(cal)
            except NoFeasibleLambdaError:
                grid = np.logspace(-6, 2, 20_000)
                assert not np.any(null_e_mean(grid, scores) <= cal.target)
                continue
            assert 0 < lam <= DEFAULT_LAMBDA_MAX
            assert null_e_mean(lam, scores) <= cal.target + 1e-12
            # Infinitesimally above the returned value the predicate fails,
            # unless the answer saturated at the ceiling.
            if lam < DEFAULT_LAMBDA_MAX:
                assert null_e_mean(lam * (1 + 1e-4), scores) > cal.target

    def test_custom_target(self):
        # exp(-lam) <= 0.5 needs lam >= ln 2 = 0.693.
        scores = np.full(10, 1.0)
        cal = CalibrationSet(scores, target=0.5)
        assert calibrate_lambda(cal, lam_max=1.0) == 1.0
        with pytest.raises(NoFeasibleLambdaError):
            calibrate_lambda(cal, lam_max=0.6)

    def test_validation(self):
        with pytest.raises(ConfigError):
            CalibrationSet(np.array([]))
        with pytest.raises(ConfigError):
            CalibrationSet(np.array([1.0]), target=0.0)
        with pytest.raises(ConfigError):
            calibrate_lambda(CalibrationSet(np.array([1.0])), lam_max=0.0)
