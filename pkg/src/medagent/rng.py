"""Deterministic 64-bit pseudo-random generator (splitmix64).

All randomness in this package (weight init, epoch shuffles, dropout masks,
split shuffles, seed derivation) flows through the splitmix64 sequence so
that results are bit-reproducible and independent of thread scheduling.

Algorithm (64-bit wrapping arithmetic throughout):

    state_{i+1} = state_i + 0x9E3779B97F4A7C15          (golden-ratio step)
    output_i    = avalanche(state_{i+1})

    avalanche(z):
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)

``mix(w0, w1, ...)`` derives child seeds by absorbing each word into a
running state (add word, add golden-ratio step, avalanche).  Derived seeds
therefore depend only on the argument words, never on call order or
scheduling.

Floats in [0, 1) take the top 53 bits of an output: ``(u >> 11) * 2**-53``.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_F53 = 2.0**-53


def avalanche(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def mix(*words: int) -> int:
    """Hash one or more 64-bit words into a derived seed."""
    if not words:
        raise ValueError("mix() needs at least one word")
    h = 0
    for w in words:
        h = avalanche((h + GOLDEN + (w & MASK64)) & MASK64)
    return h


class SplitMix64:
    """Sequential splitmix64 stream."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN) & MASK64
        return avalanche(self._state)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * _F53

    def next_below(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < threshold:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]


def random_u64_array(seed: int, n: int) -> np.ndarray:
    """First ``n`` outputs of the splitmix64 stream for ``seed``, vectorized.

    Element i equals avalanche(seed + (i+1)*GOLDEN), matching SplitMix64.
    """
    idx = np.arange(1, n + 1, dtype=np.uint64)
    z = np.uint64(seed & MASK64) + idx * np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def random_floats(seed: int, n: int) -> np.ndarray:
    """``n`` float64 values in [0, 1) from the splitmix64 stream."""
    return (random_u64_array(seed, n) >> np.uint64(11)).astype(np.float64) * _F53


def random_uniform(seed: int, n: int, low: float, high: float) -> np.ndarray:
    """``n`` float64 values in [low, high)."""
    return low + random_floats(seed, n) * (high - low)
