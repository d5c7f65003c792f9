"""Deterministic random-stream derivation.

Every stochastic component draws from its own substream derived from a
64-bit master seed and an integer key path. Substreams are independent
PCG64 generators, so reordering or parallelizing consumers cannot change
any individual stream. The same (seed, key path) always yields the same
generator state, which is what makes training resumable and CLI outputs
byte-reproducible.
"""

from __future__ import annotations

import numpy as np

# Key-path roots, one per pipeline component.
KEY_SPLIT = 1
KEY_TRAIN = 2
KEY_PREDICT = 3
KEY_SYNTH = 4
KEY_TRACE = 5

# Sub-keys under KEY_TRAIN (second path element).
KEY_TRAIN_INIT = 0
KEY_TRAIN_ITER = 1


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the PCG64 generator for the given seed and key path."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def substream_seed(seed: int, *key: int) -> int:
    """Collapse a (seed, key path) substream into a plain 64-bit seed.

    Used where an API takes a scalar seed (e.g. per-item prediction
    substreams) but the value must still be derived deterministically.
    """
    words = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)).generate_state(2, dtype=np.uint32)
    return int(words[0]) | (int(words[1]) << 32)
