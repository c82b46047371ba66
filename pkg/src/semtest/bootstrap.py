"""Equivariant bootstrap of the reconstruction distribution and the
sign-test alternative to the e-value test.

The resampling recipe implemented here: shift the current estimate by a
random group element, re-measure it with fresh Gaussian noise at the
inflated covariance, re-estimate, and undo the shift.  This is one
documented interpretation of equivariant bootstrapping; the sign test on
the resulting statistics is exact Binomial(K, 1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .etest import FAIL_TO_REJECT, REJECT, _check_levels, _level_key
from .types import (
    GAUSSIAN,
    CovModel,
    ForwardModel,
    HypothesisPair,
    ImageVec,
    MeasurementVec,
)

DEFAULT_SIM_FLOOR = 1e-6


@dataclass(frozen=True)
class BootstrapResult:
    t_tilde: np.ndarray
    s_count: int                 # number of statistics below kappa
    p_value: float
    decisions: dict[str, str]
    clamped: int = 0             # similarities clipped at the floor inside the log

    def rejected_at(self, alpha: float) -> bool:
        return self.decisions[_level_key(alpha)] == REJECT


def equivariant_bootstrap(
    y2: MeasurementVec,
    forward: ForwardModel,
    cov_tau: CovModel,
    estimator,
    group,
    k: int,
    rng: np.random.Generator,
    image_shape: tuple[int, int, int],
) -> list[ImageVec]:
    """K resampled reconstructions sharing the sampling law of x_hat(Y2)."""
    if k < 1:
        raise ConfigError("bootstrap sample count must be >= 1")
    xhat = estimator.estimate(y2)
    xhat = ImageVec(xhat.data, shape=image_shape)
    samples = []
    for _ in range(k):
        params = group.sample_params(rng)
        shifted = group.apply(params, xhat)
        noise = cov_tau.sqrt_apply(rng.standard_normal(cov_tau.dim))
        y_k = MeasurementVec(forward.apply(shifted.data) + noise, GAUSSIAN)
        re_est = estimator.estimate(y_k)
        re_est = ImageVec(re_est.data, shape=image_shape)
        samples.append(group.invert(params, re_est))
    return samples


def bootstrap_statistics(
    samples,
    encoder,
    hyp: HypothesisPair,
    lam: float,
    sim_floor: float = DEFAULT_SIM_FLOOR,
) -> tuple[np.ndarray, int]:
    """Log-ratio statistics log(D0 / D1) with similarity clamping.

    D_i = lam * phi_x(x_k) . q_i; non-positive similarities are clamped to
    ``sim_floor`` inside the log, and the number of clamps is reported.
    """
    if not samples:
        raise ConfigError("bootstrap sample set is empty")
    if sim_floor <= 0:
        raise ConfigError("similarity floor must be positive")
    t = np.empty(len(samples))
    clamped = 0
    for i, x in enumerate(samples):
        emb = encoder.encode(x)
        d0 = lam * emb.dot(hyp.q0)
        d1 = lam * emb.dot(hyp.q1)
        if d0 < sim_floor:
            d0 = sim_floor
            clamped += 1
        if d1 < sim_floor:
            d1 = sim_floor
            clamped += 1
        t[i] = math.log(d0) - math.log(d1)
    return t, clamped


def sign_test(t_tilde, kappa: float, levels) -> BootstrapResult:
    """One-sided exact sign test of median(t_tilde) >= kappa.

    S counts statistics below kappa; the p-value is the exact upper
    Binomial(K, 1/2) tail at S, computed with integer arithmetic.
    """
    levels = _check_levels(levels)
    t = np.asarray(t_tilde, dtype=np.float64).ravel()
    k = t.size
    if k < 1:
        raise ConfigError("sign test needs at least one statistic")
    s = int(np.count_nonzero(t < kappa))
    tail = sum(math.comb(k, j) for j in range(s, k + 1))
    p_value = float(tail / (1 << k))
    decisions = {
        _level_key(a): (REJECT if p_value <= a else FAIL_TO_REJECT) for a in levels
    }
    return BootstrapResult(t, s, p_value, decisions)


@dataclass(frozen=True)
class BootstrapConfig:
    k: int
    kappa: float = 0.0
    max_shift: tuple[int, int] = (2, 2)
    sim_floor: float = DEFAULT_SIM_FLOOR

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("bootstrap sample count must be >= 1")
        if self.sim_floor <= 0:
            raise ConfigError("similarity floor must be positive")


def calibrate_kappa(null_t_tilde, fraction: float = 0.01) -> float:
    """kappa as a configurable fraction of a null-calibration median."""
    t = np.asarray(null_t_tilde, dtype=np.float64)
    if t.size == 0:
        raise ConfigError("empty calibration sample for kappa")
    return float(fraction * np.median(t))
