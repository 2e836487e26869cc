"""Counter-based uniforms keyed by (seed, stream, index).

Every draw is addressed, not consumed: the value at ``index`` of ``stream``
under ``seed`` does not depend on which other draws were requested before.
The generator is numpy's Philox4x64 with a 128-bit key ``seed << 64 | stream``;
one counter block yields four 64-bit words.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

EDGE_STREAM = 1 << 63
MASK64 = (1 << 64) - 1
BITS = 53
ONE = 1 << BITS


def _key(seed: int, stream: int) -> int:
    if not 0 <= seed <= MASK64:
        raise ValueError("seed must be an unsigned 64-bit value")
    if not 0 <= stream <= MASK64:
        raise ValueError("stream must be an unsigned 64-bit value")
    return (seed << 64) | stream


def raw_words(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """64-bit words ``start .. start+count-1`` of one stream."""
    if start < 0 or count < 0:
        raise ValueError("start and count must be nonnegative")
    block, offset = divmod(start, 4)
    gen = np.random.Philox(key=_key(seed, stream), counter=block)
    return gen.random_raw(offset + count)[offset:]


def uniform_ints(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """53-bit integers k; the uniform variate is k / 2^53."""
    return raw_words(seed, stream, start, count) >> np.uint64(64 - BITS)


def uniforms(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    return uniform_ints(seed, stream, start, count).astype(np.float64) / ONE


def below_threshold(prob) -> int:
    """Integer T with (k / 2^53 < prob) iff (k < T) for 53-bit k."""
    q = Fraction(prob)
    if q <= 0:
        return 0
    if q >= 1:
        return ONE
    return math.ceil(q * ONE)


def derive_seed(seed: int, *path: int) -> int:
    """A child 64-bit seed for sub-experiments such as trial ``t``."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
