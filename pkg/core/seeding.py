"""Splittable seed derivation.

Every random stream in the project is identified by a master seed and a
tuple of stream indices (cell, run, ...). Streams are derived with numpy's
`SeedSequence` spawn keys, so results never depend on how many workers
consumed them or in which order.
"""

import numpy as np


def stream(seed, *index):
    """Return a fresh generator for stream `index` under master `seed`."""
    sequence = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(i) for i in index))
    return np.random.default_rng(sequence)

