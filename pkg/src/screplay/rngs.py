"""Seed-splitting helpers.

Every stochastic consumer (stream shuffling, buffer sampling, parameter
init, augmentation, ...) gets its own generator derived from the master
experiment seed with a fixed label, so adding or reordering one consumer
cannot change the draws any other consumer sees.
"""

import numpy as np

# Fixed spawn labels; never renumber, or old seeds stop reproducing.
STREAM = 1
BUFFER = 2
PARAM_INIT = 3
AUGMENT = 4
EPOCH_SHUFFLE = 5
DATA_GEN = 6


def child_rng(master_seed: int, label: int, *extra: int) -> np.random.Generator:
    """Generator for one consumer, derived from ``master_seed`` and a label."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(label, *extra))
    return np.random.default_rng(seq)
