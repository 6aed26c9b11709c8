"""Deterministic random number generation.

Noise injection must be bit-reproducible across platforms and BLAS builds,
so sampling is built on an explicit xoshiro256++ generator (seeded through
SplitMix64) instead of a library RNG whose stream layout may change between
releases.  Variates are produced by inverse-CDF transforms of 53-bit
uniforms drawn in a fixed order.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256pp:
    """xoshiro256++ with its four 64-bit state words expanded from the seed
    by SplitMix64, as recommended by the generator's authors."""

    def __init__(self, seed: int):
        s = int(seed) & _MASK64
        state = []
        for _ in range(4):
            s, word = _splitmix64(s)
            state.append(word)
        self._s = state

    def next_uint64(self) -> int:
        s0, s1, s2, s3 = self._s
        out = (_rotl((s0 + s3) & _MASK64, 23) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return out

    def uniform(self, n: int) -> np.ndarray:
        """n doubles on the open interval (0, 1), one per 64-bit draw."""
        out = np.empty(n)
        for i in range(n):
            # top 53 bits, offset by half an ulp so 0 and 1 are excluded
            out[i] = ((self.next_uint64() >> 11) + 0.5) * 2.0 ** -53
        return out

    def standard_normal(self, n: int) -> np.ndarray:
        """Unit Gaussian variates via the inverse normal CDF."""
        return ndtri(self.uniform(n))

    def standard_laplace(self, n: int, b: float = 1.0) -> np.ndarray:
        """Laplace(0, b) variates via the inverse CDF."""
        q = self.uniform(n) - 0.5
        return -b * np.sign(q) * np.log1p(-2.0 * np.abs(q))
