"""Portable deterministic randomness.

Every stochastic step in the pipeline (splitting, downsampling, bootstrap
resampling, fold shuffling) draws from SplitMix64 so that results are
bit-identical across platforms and Python versions.  The generator, the
rejection-sampling scheme, and the shuffle are fixed conventions of the
data contract:

* SplitMix64: state advances by the 64-bit golden-ratio constant
  0x9E3779B97F4A7C15; output is the finalizer
  ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
  z *= 0x94D049BB133111EB; z ^= z >> 31`` (all arithmetic mod 2**64).
* ``next_below(n)``: unbiased rejection sampling, discarding draws at or
  above the largest multiple of ``n`` that fits in 64 bits.
* ``shuffle``: Fisher-Yates from the last element down, swapping index
  ``i`` with ``next_below(i + 1)``.
* Named substreams: ``derive(seed, tag)`` seeds a child generator with
  ``seed XOR fnv1a64(tag)`` so that independent pipeline steps sharing a
  run seed never consume from the same stream.
"""

from __future__ import annotations

from collections.abc import MutableSequence, Sequence

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """FNV-1a over bytes, 64-bit variant."""
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


class SplitMix64:
    """Minimal SplitMix64 stream over python ints."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n) without modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        # Largest multiple of n representable in 64 bits; draws past it
        # would over-weight small residues, so they are rejected.
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            draw = self.next_u64()
            if draw < limit:
                return draw % n

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def shuffle(self, items: MutableSequence) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), in ascending order."""
        if not 0 <= k <= n:
            raise ValueError("need 0 <= k <= n")
        pool = list(range(n))
        self.shuffle(pool)
        return sorted(pool[:k])


def derive(seed: int, tag: str) -> SplitMix64:
    """Child generator for the named substream of a run seed."""
    return SplitMix64((seed & _MASK64) ^ fnv1a64(tag.encode("utf-8")))
