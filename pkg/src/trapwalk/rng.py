"""Deterministic stream splitting for parallel Monte Carlo.

Every replica (path, field, bootstrap draw, ...) gets its own counter-based
generator derived from a master seed and a stream index, so results never
depend on scheduling or worker count.
"""

from __future__ import annotations

import numpy as np

_MAX_INDEX = 2**63


def split_seed(master_seed: int, stream_index: int) -> np.random.Generator:
    """Return an independent, reproducible generator for one stream.

    Streams with distinct indices never collide: splitting goes through
    a seed-sequence spawn key feeding a Philox (counter-based) bit
    generator.
    """
    if not 0 <= stream_index < _MAX_INDEX:
        raise ValueError(f"stream_index out of range [0, 2**63): {stream_index}")
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(stream_index,))
    return np.random.Generator(np.random.Philox(ss))


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Generator addressed by a tuple key, e.g. (L_index, field, path)."""
    for k in key:
        if not 0 <= k < _MAX_INDEX:
            raise ValueError(f"stream key component out of range: {k}")
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))
