"""Noise-injection measurement splitting.

One noisy measurement is turned into two conditionally independent
pseudo-measurements with the same mean: one for reconstruction, one
reserved for hypothesis testing.

Gaussian:        y1 = y + tau * Z,   y2 = y - Z / tau,   Z ~ N(0, Sigma)
Scaled Poisson:  z_i ~ Binomial(y_i / gamma, beta)
                 y1 = (y - gamma * z) / (1 - beta),  y2 = gamma * z / beta

Reconstruction identities, exact up to floating point:
    (y1 + tau^2 * y2) / (1 + tau^2) = y       (Gaussian)
    (1 - beta) * y1 + beta * y2 = y           (Poisson)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    NonIntegerCountsError,
    UnsupportedNoiseFamilyError,
)
from .types import (
    GAUSSIAN,
    SCALED_POISSON,
    CovModel,
    MeasurementVec,
    gaussian_sample,
)

_COUNT_TOL = 1e-9
# Counts at or below this threshold are sampled by exact CDF inversion from a
# single uniform; larger counts fall back to the generator's BTPE sampler.
_INVERSION_MAX = 64


@dataclass(frozen=True)
class GaussianSplit:
    tau: float
    cov: CovModel

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError("tau must be positive")


@dataclass(frozen=True)
class PoissonSplit:
    beta: float
    gamma: float

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ConfigError("beta must lie in (0, 1)")
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")


SplitConfig = GaussianSplit | PoissonSplit


@dataclass(frozen=True)
class SplitPair:
    y1: MeasurementVec
    y2: MeasurementVec
    config: SplitConfig


def beta_to_tau(beta: float) -> float:
    """Convert the convex-combination weight to the Gaussian noise scale."""
    if not 0 < beta < 1:
        raise ConfigError("beta must lie in (0, 1)")
    return math.sqrt(beta / (1.0 - beta))


def tau_to_beta(tau: float) -> float:
    if tau <= 0:
        raise ConfigError("tau must be positive")
    return tau * tau / (1.0 + tau * tau)


def gaussian_split(
    y: MeasurementVec, tau: float, cov: CovModel, rng: np.random.Generator
) -> SplitPair:
    if y.noise_family != GAUSSIAN:
        raise ConfigError("gaussian_split requires a Gaussian measurement")
    if tau <= 0:
        raise ConfigError("tau must be positive")
    if cov.dim != y.m:
        raise ConfigError(f"covariance dim {cov.dim} != measurement dim {y.m}")
    z = gaussian_sample(rng, cov)
    y1 = MeasurementVec(y.data + tau * z, GAUSSIAN)
    y2 = MeasurementVec(y.data - z / tau, GAUSSIAN)
    return SplitPair(y1, y2, GaussianSplit(tau, cov))


def _binomial_counts(
    counts: np.ndarray, beta: float, rng: np.random.Generator
) -> np.ndarray:
    """Binomial(counts, beta) per coordinate, deterministic given the stream.

    Small counts use exact CDF inversion (one uniform each); large counts use
    the generator's built-in sampler.
    """
    z = np.zeros(counts.shape, dtype=np.int64)
    small = counts <= _INVERSION_MAX
    if np.any(small):
        n = counts[small]
        u = rng.random(n.shape)
        pmf = (1.0 - beta) ** n
        cdf = pmf.copy()
        zk = np.zeros(n.shape, dtype=np.int64)
        assigned = u < cdf
        ratio = beta / (1.0 - beta)
        for j in range(1, int(n.max()) + 1 if n.size else 0):
            pmf = np.where(j <= n, pmf * (n - (j - 1)) / j * ratio, 0.0)
            cdf = cdf + pmf
            newly = ~assigned & (u < cdf)
            zk[newly] = j
            assigned |= newly
        zk[~assigned] = n[~assigned]
        z[small] = zk
    if np.any(~small):
        z[~small] = rng.binomial(counts[~small], beta)
    return z


def poisson_split(
    y: MeasurementVec, beta: float, gamma: float, rng: np.random.Generator
) -> SplitPair:
    if y.noise_family != SCALED_POISSON:
        raise ConfigError("poisson_split requires a scaled-Poisson measurement")
    config = PoissonSplit(beta, gamma)
    scaled = y.data / gamma
    counts = np.rint(scaled)
    if np.any(np.abs(scaled - counts) > _COUNT_TOL):
        raise NonIntegerCountsError(
            "measurement entries are not integer multiples of gamma"
        )
    if np.any(counts < 0):
        raise ConfigError("scaled-Poisson counts must be non-negative")
    z = _binomial_counts(counts.astype(np.int64), beta, rng)
    y1 = MeasurementVec((y.data - gamma * z) / (1.0 - beta), SCALED_POISSON)
    y2 = MeasurementVec(gamma * z / beta, SCALED_POISSON)
    return SplitPair(y1, y2, config)


def split(y: MeasurementVec, config, rng: np.random.Generator) -> SplitPair:
    """Dispatch on the configured family."""
    if isinstance(config, GaussianSplit):
        return gaussian_split(y, config.tau, config.cov, rng)
    if isinstance(config, PoissonSplit):
        return poisson_split(y, config.beta, config.gamma, rng)
    raise UnsupportedNoiseFamilyError(
        "only Gaussian and scaled-Poisson splitting are implemented; "
        "Binomial and Gamma recipes are given in the recorrupted-to-recorrupted "
        "literature and are out of scope here"
    )
