"""Temperature calibration and the tau trade-off sweep.

The null mean of the e-value, E_hat(lam) = mean(exp(-lam * s_i)) over held-out
null scores, is convex in lam with E_hat(0) = 1.  Power grows with lam (the
rejection threshold is log(alpha) / lam), so we pick the LARGEST lam whose
null mean stays at or below the target (default 0.98).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NoFeasibleLambdaError

DEFAULT_TARGET = 0.98
DEFAULT_LAMBDA_MAX = 100.0
_GRID_POINTS = 256
_GRID_DECADES = 8          # grid spans [lam_max * 1e-8, lam_max], log-spaced
_REL_TOL = 1e-6


@dataclass(frozen=True)
class CalibrationSet:
    scores: np.ndarray
    target: float = DEFAULT_TARGET

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64).ravel()
        if scores.size == 0 or not np.all(np.isfinite(scores)):
            raise ConfigError("calibration scores must be non-empty and finite")
        if not 0 < self.target <= 1:
            raise ConfigError("target must lie in (0, 1]")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)


def null_e_mean(lam, scores: np.ndarray):
    """E_hat(lam) = mean(exp(-lam * s)); accepts scalar or array lam."""
    lam = np.asarray(lam, dtype=np.float64)
    return np.mean(np.exp(-np.multiply.outer(lam, scores)), axis=-1)


def calibrate_lambda(
    cal: CalibrationSet, lam_max: float = DEFAULT_LAMBDA_MAX
) -> float:
    """Largest lam in (0, lam_max] with E_hat(lam) <= target.

    Brackets on a 256-point log grid, then bisects the upper feasibility
    boundary to relative tolerance 1e-6.  Returns lam_max when the whole
    range is feasible; raises NoFeasibleLambdaError when none of it is.
    """
    if lam_max <= 0:
        raise ConfigError("lam_max must be positive")
    scores, target = cal.scores, cal.target
    if not np.any(scores > 0):
        raise NoFeasibleLambdaError(
            "no positive null scores: exp(-lam*s) cannot drop below the target"
        )
    grid = np.logspace(
        np.log10(lam_max) - _GRID_DECADES, np.log10(lam_max), _GRID_POINTS
    )
    feasible = null_e_mean(grid, scores) <= target
    if not np.any(feasible):
        raise NoFeasibleLambdaError(
            f"E_hat(lam) stays above {target} for all lam in "
            f"[{grid[0]:.3g}, {lam_max:.3g}]"
        )
    # Convexity makes the feasible set an interval: take its last grid point.
    hi_idx = int(np.max(np.nonzero(feasible)[0]))
    if hi_idx == _GRID_POINTS - 1:
        return float(lam_max)
    lo, hi = grid[hi_idx], grid[hi_idx + 1]
    # Bisect the upward crossing of E_hat through the target; keep the
    # feasible side so the returned lam always satisfies the predicate.
    while (hi - lo) > _REL_TOL * lo:
        mid = 0.5 * (lo + hi)
        if null_e_mean(mid, scores) <= target:
            lo = mid
        else:
            hi = mid
    return float(lo)


@dataclass(frozen=True)
class TauSweepRow:
    tau: float
    psnr_y1: float
    psnr_stderr: float
    power: dict[str, float] = field(default_factory=dict)  # level key -> power
    power_stderr: dict[str, float] = field(default_factory=dict)


def tau_sweep(scenario, taus, trials: int, master_seed: int) -> list[TauSweepRow]:
    """Reconstruction-quality / testing-power trade-off across tau values.

    For each tau, PSNR of y1 against the ground truth (MAX = 1) is averaged
    over null-class trials and power is the rejection frequency over
    alternative-class trials, using the scenario's temperature.
    """
    # Local import: harness also imports calibrate_lambda from this module.
    from .harness import build_scenario, resolve_lambda, sweep_cell

    lam = resolve_lambda(build_scenario(scenario), master_seed)
    rows = []
    for j, tau in enumerate(taus):
        if tau <= 0:
            raise ConfigError("tau values must be positive")
        rows.append(
            sweep_cell(scenario, float(tau), trials, master_seed, cell_index=j, lam=lam)
        )
    return rows
