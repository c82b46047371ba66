"""Deterministic random number generation.

The whole toolkit draws from Philox4x64 counter-based generators.  A child
generator for unit of work ``i`` is a pure function of ``(master_seed, i)``,
so parallel Monte Carlo trials are reproducible regardless of scheduling
order.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "philox4x64"


def master_rng(seed: int) -> np.random.Generator:
    """Generator for single-stream work, keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def child_rng(master_seed: int, *index: int) -> np.random.Generator:
    """Independent child generator for a unit of parallel work.

    ``index`` may be nested, e.g. ``child_rng(seed, repeat, trial)``.  The
    result depends only on the arguments, never on call order.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(index))
    return np.random.Generator(np.random.Philox(ss))
