"""Counter-based seed derivation for reproducible, order-independent runs.

Every random draw in a simulation gets its generator from a
``SeedSequence`` keyed by (master seed, purpose, step, index, ...), so
parallel execution order cannot change any result.
"""

from __future__ import annotations

import numpy as np


def child_seed(seed, *key: int) -> np.random.SeedSequence:
    """Derived seed; composes when ``seed`` is itself a derived SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + key)
    return np.random.SeedSequence(seed, spawn_key=key)


def rng_for(seed, *key: int) -> np.random.Generator:
    return np.random.default_rng(child_seed(seed, *key))
