"""Deterministic seed derivation.

Every stochastic step in the toolkit draws from a numpy Generator built
here from a root seed plus a purpose key, so independent streams never
collide and a run is fully reproducible from its recorded root seed.
"""

from __future__ import annotations

import numpy as np

# Purpose codes for SeedSequence spawn keys (stable across versions).
TRUTH = 1        # synthetic ground-truth preference draws
POOL = 2         # candidate-pool query generation
CHAIN = 3        # Metropolis-Hastings proposal/acceptance streams
ANSWER = 4       # simulated user choices on active-policy queries
HOLDOUT = 5      # random holdout query generation
HOLDOUT_ANSWER = 6
RANDOM_QUERY = 7  # random-policy training queries
RANDOM_CHAIN = 8
START = 9        # optimizer multi-start points


def rng_for(root_seed: int, *key: int) -> np.random.Generator:
    """Generator for stream ``key`` of the run seeded by ``root_seed``."""
    return np.random.default_rng(np.random.SeedSequence(root_seed, spawn_key=key))


def derived_seed(root_seed: int, *key: int) -> int:
    """A plain integer seed derived from ``root_seed`` and a purpose key,
    for APIs that record the seed they ran with."""
    return int(np.random.SeedSequence(root_seed, spawn_key=key).generate_state(1, np.uint64)[0])
