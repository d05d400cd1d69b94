"""
Seeded random substreams.

Every random draw in a run comes from a Philox (counter-based) generator keyed
by the master seed plus a spawn key such as (strip, row). Substreams are
independent of each other and of the order in which they are created, so
strips can be simulated in any order or in parallel with identical results.
"""

# External imports
import numpy as np


def substream(seed: int, *key: int) -> np.random.Generator:
    """
    Independent generator for the substream `key` of master `seed`.

    Args:
        seed (int): Master seed of the run (64-bit).
        *key (int): Spawn key, e.g. ``(STREAM_FIELD, strip_index)``.

    Returns:
        np.random.Generator: Philox-backed generator.
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(sequence))


# Top-level spawn-key namespaces, so field generation and detection never share draws.
STREAM_FIELD = 0
STREAM_PASS = 1
