"""Seeded stream derivation for reproducible runs.

Every random draw in the library flows through an explicitly seeded
numpy PCG64 generator whose 64-bit seed is derived with splitmix64 from a
run seed plus integer context tags (query id, stage index, ...).  The
platform default RNG is never used, so identical seeds give identical
streams regardless of call order, thread scheduling, or platform.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Context tags keeping independent purposes on independent streams.
TAG_GEN = 0x01
TAG_PARTITION = 0x02
TAG_GHOST_SAMPLE = 0x03
TAG_SEARCH = 0x04
TAG_GHOST_SEARCH = 0x05
TAG_DISCARD = 0x06


def splitmix64(state: int) -> int:
    """One splitmix64 output for the given 64-bit state."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *parts: int) -> int:
    """Mix a base seed with integer context tags into a fresh 64-bit seed."""
    x = splitmix64(seed & _MASK64)
    for p in parts:
        x = splitmix64(x ^ (int(p) & _MASK64))
    return x


def stream(seed: int, *parts: int) -> np.random.Generator:
    """PCG64 generator seeded from ``derive_seed(seed, *parts)``."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *parts)))
