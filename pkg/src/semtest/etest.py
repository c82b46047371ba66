"""E-value semantic test and the temperature-scaled softmax baseline.

The statistic is t = lambda * (phi_x . q0 - phi_x . q1): positive when the
reconstruction agrees with the null proposition.  E = exp(-t) is an e-value
under the null (its expectation stays at or below 1 once the temperature is
calibrated), so Markov's inequality gives a level-alpha test: reject when
E >= 1/alpha.  The associated p-value min(1, 1/E) is conservative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .types import HypothesisPair, UnitEmbedding

REJECT = "reject"
FAIL_TO_REJECT = "fail_to_reject"


def _check_levels(levels) -> list[float]:
    out = [float(a) for a in levels]
    for a in out:
        if not 0 < a < 1:
            raise ConfigError(f"significance level {a} outside (0, 1)")
    return out


@dataclass(frozen=True)
class EValueOutcome:
    raw_score: float            # phi_x . (q0 - q1), in [-2, 2]
    t: float                    # lambda * raw_score
    e_value: float
    p_value: float
    decisions: dict[str, str]   # level (as str) -> reject / fail_to_reject

    def rejected_at(self, alpha: float) -> bool:
        return self.decisions[_level_key(alpha)] == REJECT


@dataclass(frozen=True)
class SoftmaxOutcome:
    p0: float
    p1: float
    decisions: dict[str, str]

    def rejected_at(self, alpha: float) -> bool:
        return self.decisions[_level_key(alpha)] == REJECT


def _level_key(alpha: float) -> str:
    return repr(float(alpha))


def raw_score(phi_x: UnitEmbedding, hyp: HypothesisPair) -> float:
    if phi_x.dim != hyp.dim:
        raise ConfigError(
            f"embedding dim {phi_x.dim} differs from hypothesis dim {hyp.dim}"
        )
    return float(phi_x.v @ hyp.delta_q)


def statistic(phi_x: UnitEmbedding, hyp: HypothesisPair, lam: float) -> float:
    """t = lambda * phi_x . (q0 - q1); the temperature enters exactly once."""
    if lam <= 0:
        raise ConfigError("temperature must be positive")
    return lam * raw_score(phi_x, hyp)


def evaluate(
    phi_x: UnitEmbedding, hyp: HypothesisPair, lam: float, levels
) -> EValueOutcome:
    levels = _check_levels(levels)
    s = raw_score(phi_x, hyp)
    if lam <= 0:
        raise ConfigError("temperature must be positive")
    t = lam * s
    # Decisions in log space: E >= 1/alpha  <=>  t <= log(alpha).
    decisions = {
        _level_key(a): (REJECT if t <= math.log(a) else FAIL_TO_REJECT)
        for a in levels
    }
    e_value = math.exp(-t)
    p_value = min(1.0, math.exp(t))
    return EValueOutcome(s, t, e_value, p_value, decisions)


def softmax_baseline(
    phi_x: UnitEmbedding, hyp: HypothesisPair, lam: float, levels
) -> SoftmaxOutcome:
    """Zero-shot classification probabilities with temperature scaling.

    p0 = exp(D0) / (exp(D0) + exp(D1)) with D_i = lambda * phi_x . q_i;
    reject the null at level alpha when p0 <= alpha.
    """
    levels = _check_levels(levels)
    if lam <= 0:
        raise ConfigError("temperature must be positive")
    d0 = lam * phi_x.dot(hyp.q0)
    d1 = lam * phi_x.dot(hyp.q1)
    # Stable logistic of (d0 - d1).
    diff = d0 - d1
    if diff >= 0:
        p0 = 1.0 / (1.0 + math.exp(-diff))
    else:
        e = math.exp(diff)
        p0 = e / (1.0 + e)
    decisions = {
        _level_key(a): (REJECT if p0 <= a else FAIL_TO_REJECT) for a in levels
    }
    return SoftmaxOutcome(p0, 1.0 - p0, decisions)


def evaluate_scores(scores: np.ndarray, lam: float, levels) -> dict[str, np.ndarray]:
    """Vectorized rejection indicators for a batch of raw scores."""
    levels = _check_levels(levels)
    t = lam * np.asarray(scores, dtype=np.float64)
    return {_level_key(a): t <= math.log(a) for a in levels}
