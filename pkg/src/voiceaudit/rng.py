"""Deterministic random number generation.

Every stochastic step in this package (dataset splits, bootstrap sampling,
simulated transcription errors, repeat-seed derivation) draws from one named
generator so that results reproduce bit-for-bit across platforms and Python
versions. The generator is xoshiro256** seeded through splitmix64; model files
record the name so a stored model documents its own provenance.
"""

from __future__ import annotations

import math
from typing import Sequence, TypeVar

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

GENERATOR_NAME = "xoshiro256** seeded via splitmix64"

T = TypeVar("T")


def _mix64(x: int) -> int:
    """splitmix64 output scramble of a 64-bit state word."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(base_seed: int, index: int) -> int:
    """Seed for substream `index`: the (index+1)-th output of a splitmix64
    stream started at `base_seed`. O(1) because splitmix64 advances its state
    by a fixed increment."""
    if index < 0:
        raise ValueError("substream index must be >= 0")
    return _mix64((base_seed + (index + 1) * _GOLDEN) & _MASK64)


def hash_string(text: str) -> int:
    """64-bit FNV-1a of the UTF-8 bytes, scrambled through splitmix64.

    Used to key per-user / per-record substreams so results do not depend on
    iteration order.
    """
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & _MASK64
    return _mix64(h)


def unit_float(word: int) -> float:
    """Map a 64-bit word to [0, 1) using its top 53 bits."""
    return ((word & _MASK64) >> 11) * 2.0**-53


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Rng:
    """xoshiro256** pseudo-random stream.

    Implements the small slice of a random API the package needs. All methods
    are defined here rather than delegated to `random.Random` so streams never
    depend on interpreter internals that may change between versions.
    """

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int):
        s = [_mix64((seed + (k + 1) * _GOLDEN) & _MASK64) for k in range(4)]
        if not any(s):
            s[0] = 1  # xoshiro state must not be all zero
        self._s0, self._s1, self._s2, self._s3 = s

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        limit = ((1 << 64) // n) * n
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def randint(self, a: int, b: int) -> int:
        """Uniform integer in [a, b] inclusive."""
        if b < a:
            raise ValueError("empty range")
        return a + self.randrange(b - a + 1)

    def uniform(self, a: float, b: float) -> float:
        return a + (b - a) * self.random()

    def choice(self, seq: Sequence[T]) -> T:
        if not seq:
            raise IndexError("choice from empty sequence")
        return seq[self.randrange(len(seq))]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, seq: Sequence[T], k: int) -> list[T]:
        """k distinct elements, drawn without replacement (partial
        Fisher-Yates over an index array; order is part of the contract)."""
        n = len(seq)
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} items from {n}")
        idx = list(range(n))
        for i in range(k):
            j = i + self.randrange(n - i)
            idx[i], idx[j] = idx[j], idx[i]
        return [seq[idx[i]] for i in range(k)]

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Standard Box-Muller transform; the sine partner is discarded so
        each call consumes exactly two uniforms."""
        u1 = 1.0 - self.random()  # (0, 1]: keeps log() finite
        u2 = self.random()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return mu + sigma * z
