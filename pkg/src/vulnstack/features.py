"""Hashed sparse feature vectors for source text.

Two families share one hashing convention: FNV-1a (64-bit) over the
UTF-8 bytes of the feature string, masked to ``dim - 1``.  ``dim`` must
be a power of two of at least 2**10 so the mask is a clean modulus.

* Token features: one string per token lexeme (unigrams) plus one per
  adjacent lexeme pair joined by the 0x1F unit separator (bigrams).
* Character features: every 3-, 4-, and 5-gram window of the raw text.

Bucket values are occurrence counts scaled by 1/sqrt(total features in
the sample), so a sample with no repeated features is unit length and
magnitudes stay comparable across sample lengths.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .lexer import Token
from .rng import fnv1a64

BIGRAM_SEPARATOR = "\x1f"
MIN_DIM = 1 << 10


def check_dim(dim: int) -> None:
    if not isinstance(dim, int) or isinstance(dim, bool):
        raise ValueError("dim must be an integer")
    if dim < MIN_DIM or dim & (dim - 1):
        raise ValueError(f"dim must be a power of two >= {MIN_DIM}, got {dim}")


@dataclass(frozen=True)
class FeatureVector:
    dim: int
    indices: tuple[int, ...]  # strictly increasing
    values: tuple[float, ...]

    def to_dense(self):
        import numpy as np

        dense = np.zeros(self.dim)
        if self.indices:
            dense[list(self.indices)] = self.values
        return dense


def _hash_features(strings: Iterable[str], dim: int) -> FeatureVector:
    counts: Counter[int] = Counter()
    total = 0
    for s in strings:
        counts[fnv1a64(s.encode("utf-8")) & (dim - 1)] += 1
        total += 1
    if total == 0:
        return FeatureVector(dim, (), ())
    scale = 1.0 / math.sqrt(total)
    indices = tuple(sorted(counts))
    return FeatureVector(dim, indices, tuple(counts[i] * scale for i in indices))


def featurize(tokens: Sequence[Token], dim: int) -> FeatureVector:
    """Unigram and bigram lexeme features of a token stream."""
    check_dim(dim)

    def strings():
        for token in tokens:
            yield token.text
        for first, second in zip(tokens, tokens[1:]):
            yield first.text + BIGRAM_SEPARATOR + second.text

    return _hash_features(strings(), dim)


def featurize_chars(
    text: str, dim: int, min_n: int = 3, max_n: int = 5
) -> FeatureVector:
    """Character n-gram features of raw text, n in [min_n, max_n]."""
    check_dim(dim)
    if not 1 <= min_n <= max_n:
        raise ValueError(f"bad n-gram range [{min_n}, {max_n}]")

    def strings():
        for n in range(min_n, max_n + 1):
            for start in range(len(text) - n + 1):
                yield text[start : start + n]

    return _hash_features(strings(), dim)
