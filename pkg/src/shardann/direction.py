"""Packed sign-bit edge directions and agreement-based neighbor selection.

A direction vector for an edge (u -> v) stores one bit per dimension:
bit t = 1 iff v[t] - u[t] >= 0 (zero differences map to 1).  Bits are packed
little-endian into ceil(d/32) uint32 words: bit t lives in word t // 32 at
position t % 32.  Padding bits past d are zero, so XOR+popcount over whole
words counts real disagreements only.

During search, neighbors whose edge direction agrees most with the
query-minus-parent direction are kept; the rest are skipped until the
cool-down tail of the iteration budget, which expands fully.
"""

from __future__ import annotations

import math

import numpy as np

WORD_BITS = 32


def words_per_vector(d: int) -> int:
    """Packed uint32 words needed for d sign bits."""
    return (d + WORD_BITS - 1) // WORD_BITS


def pack_sign_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a (..., d) boolean array into (..., ceil(d/32)) uint32 words."""
    bits = np.asarray(bits, dtype=bool)
    d = bits.shape[-1]
    pad = words_per_vector(d) * WORD_BITS - d
    if pad:
        bits = np.concatenate(
            [bits, np.zeros(bits.shape[:-1] + (pad,), dtype=bool)], axis=-1
        )
    packed = np.packbits(bits, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u4")


def unpack_sign_bits(words: np.ndarray, d: int) -> np.ndarray:
    """Inverse of pack_sign_bits, returning a (..., d) boolean array."""
    raw = np.ascontiguousarray(np.asarray(words, dtype="<u4")).view(np.uint8)
    bits = np.unpackbits(raw, axis=-1, bitorder="little")
    return bits[..., :d].astype(bool)


def edge_direction_bits(origin: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Packed sign bits of (targets - origin) per row; origin is one vector."""
    return pack_sign_bits(targets >= origin)


def query_direction_bits(query: np.ndarray, visiting: np.ndarray) -> np.ndarray:
    """Packed sign bits of (query - visiting node), one vector each."""
    query = np.asarray(query, dtype=np.float32)
    visiting = np.asarray(visiting, dtype=np.float32)
    if query.shape != visiting.shape:
        raise ValueError(f"dimension mismatch: {query.shape} vs {visiting.shape}")
    return pack_sign_bits((query >= visiting)[None, :])[0]


def matching_count(a: np.ndarray, b: np.ndarray, d: int) -> np.ndarray:
    """Number of agreeing sign bits among the first d: d - popcount(a ^ b).

    Operates on (..., W) packed words; padding must be zeroed on both sides.
    Returns an int array with the leading shape of the inputs.
    """
    diff = np.bitwise_count(np.bitwise_xor(a, b)).sum(axis=-1)
    return (d - diff).astype(np.int64)


def keep_count(j: int, discard_ratio: float) -> int:
    """Neighbors kept per parent: max(1, round((1 - discard_ratio) * j))."""
    if not 0.0 <= discard_ratio < 1.0:
        raise ValueError(f"discard_ratio must be in [0, 1), got {discard_ratio}")
    return max(1, int((1.0 - discard_ratio) * j + 0.5))


def select_neighbors(match_counts: np.ndarray, n_keep: int) -> np.ndarray:
    """Slot indices of the n_keep best-aligned neighbors.

    Ordered by descending matching count, ties by lower slot index.  With
    n_keep >= j this is a permutation of all slots.
    """
    counts = np.asarray(match_counts)
    order = np.argsort(-counts, axis=-1, kind="stable")
    return order[..., :n_keep]


def in_cooldown(iteration: int, max_iter: int, cooldown_ratio: float) -> bool:
    """True iff the 0-indexed iteration falls in the full-expansion tail.

    The tail starts at ceil((1 - cooldown_ratio) * max_iter), computed as
    max_iter - floor(cooldown_ratio * max_iter) with a tiny epsilon guarding
    float representation of ratios like 0.3.
    """
    if not 0.0 <= cooldown_ratio <= 1.0:
        raise ValueError(f"cooldown_ratio must be in [0, 1], got {cooldown_ratio}")
    start = max_iter - int(math.floor(cooldown_ratio * max_iter + 1e-9))
    return iteration >= start


def random_slots(j: int, n_keep: int, rng: np.random.Generator) -> np.ndarray:
    """Comparison arm: n_keep slot indices drawn uniformly without replacement."""
    return rng.permutation(j)[:n_keep]
