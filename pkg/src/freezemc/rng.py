"""Deterministic seed derivation for replicated experiments.

Every replicated computation derives one stream per replicate from a master
seed and the replicate index, so results are reproducible and independent of
execution order or worker count.
"""

from __future__ import annotations

import numpy as np


def derived_seed_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    """SeedSequence keyed by (master_seed, *key); stable across processes."""
    return np.random.SeedSequence(entropy=(int(master_seed),) + tuple(int(k) for k in key))


def derived_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for one work unit, e.g. derived_rng(seed, replicate_index)."""
    return np.random.default_rng(derived_seed_sequence(master_seed, *key))
