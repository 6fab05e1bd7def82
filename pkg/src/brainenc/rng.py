"""Deterministic random-number streams.

Two fixed 64-bit counter-based generators are used throughout so that every
stochastic result is reproducible bit-for-bit from (seed, stream id) alone,
independent of how work is partitioned across workers:

* simulation streams: numpy's Philox4x64 keyed by ``(seed, stream id)``,
  where the stream id packs a purpose code and up to two indices;
* permutation sign streams: SplitMix64, one stream per (seed, permutation
  index), fully vectorizable over permutation indices.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# purpose codes for Philox stream ids
ONSETS = 1
FEATURES = 2
WEIGHTS = 3
NOISE = 4
SUBSAMPLE = 5


def stream(seed: int, purpose: int, a: int = 0, b: int = 0) -> np.random.Generator:
    """Return an independent Generator for (seed, purpose, a, b).

    The stream id is ``purpose * 2**48 + a * 2**24 + b``, so purposes and
    indices below 2**24 never collide.
    """
    if not (0 <= a < 2**24 and 0 <= b < 2**24):
        raise ValueError("stream indices must be in [0, 2**24)")
    sid = (purpose << 48) | (a << 24) | b
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), sid]))


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def signflip_signs(seed: int, perm_indices: np.ndarray, n: int) -> np.ndarray:
    """Sign patterns for a batch of permutation indices.

    Permutation ``i`` owns the SplitMix64 stream keyed by ``seed + (i+1)*phi``;
    the j-th 64-bit word of that stream supplies signs for subjects
    ``64*j .. 64*j+63``. Returns an int8 array of shape (len(perm_indices), n)
    with entries in {-1, +1}. Identical for any chunking of `perm_indices`.
    """
    idx = np.asarray(perm_indices, dtype=np.uint64)
    signs = np.empty((idx.size, n), dtype=np.int8)
    with np.errstate(over="ignore"):
        base = np.uint64(seed) + (idx + np.uint64(1)) * _GOLDEN
        base = _mix(base)
        for j in range((n + 63) // 64):
            word = _mix(base + np.uint64(j + 1) * _GOLDEN)
            lo, hi = 64 * j, min(64 * j + 64, n)
            bits = (word[:, None] >> np.arange(hi - lo, dtype=np.uint64)) & np.uint64(1)
            signs[:, lo:hi] = bits.astype(np.int8) * 2 - 1
    return signs
