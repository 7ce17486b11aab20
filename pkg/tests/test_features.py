"""Hashed feature extraction: bucket placement, scaling, and edge cases."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vulnstack.features import (
    BIGRAM_SEPARATOR,
    FeatureVector,
    check_dim,
    featurize,
    featurize_chars,
)
from vulnstack.lexer import tokenize
from vulnstack.rng import fnv1a64


def bucket(s: str, dim: int) -> int:
    return fnv1a64(s.encode("utf-8")) & (dim - 1)


class TestCheckDim:
    @pytest.mark.parametrize("dim", [1024, 2048, 4096, 1 << 20])
    def test_accepts_large_powers_of_two(self, dim):
        check_dim(dim)

    @pytest.mark.parametrize("dim", [0, 512, 1000, 1025, 3000, -1024, True, 2.0])
    def test_rejects_everything_else(self, dim):
        with pytest.raises(ValueError):
            check_dim(dim)


class TestFeaturize:
    def test_single_token_hits_its_fnv_bucket(self):
        vec = featurize(tokenize("x"), 1024)
        assert vec.indices == (bucket("x", 1024),)
        assert vec.values == (1.0,)

    def test_hand_computed_two_token_vector(self):
        # "a b" yields unigrams "a", "b" and the bigram "a\x1fb", each once,
        # scaled by 1/sqrt(3).
        dim = 4096
        vec = featurize(tokenize("a b"), dim)
        expected = {}
        for s in ("a", "b", "a" + BIGRAM_SEPARATOR + "b"):
            expected[bucket(s, dim)] = expected.get(bucket(s, dim), 0) + 1
        scale = 1.0 / math.sqrt(3)
        assert dict(zip(vec.indices, vec.values)) == pytest.approx(
            {i: c * scale for i, c in expected.items()}
        )

    def test_repeated_tokens_accumulate_counts(self):
        dim = 1024
        vec = featurize(tokenize("x x x"), dim)
        # 3 unigrams in one bucket plus 2 identical bigrams in another.
        dense = vec.to_dense()
        scale = 1.0 / math.sqrt(5)
        assert dense[bucket("x", dim)] == pytest.approx(3 * scale)
        assert dense[bucket("x" + BIGRAM_SEPARATOR + "x", dim)] == pytest.approx(2 * scale)

    def test_empty_input(self):
        vec = featurize([], 1024)
        assert vec == FeatureVector(1024, (), ())
        assert vec.to_dense().sum() == 0.0

    def test_indices_sorted_and_in_range(self):
        vec = featurize(tokenize("int main() { return f(a, b) + 1; }"), 1024)
        assert list(vec.indices) == sorted(set(vec.indices))
        assert all(0 <= i < 1024 for i in vec.indices)

    @given(st.text(alphabet=st.sampled_from(list("abc xy;=+")), max_size=80))
    @settings(max_examples=200, deadline=None)
    def test_values_are_scaled_counts(self, code):
        # Recompute the bucket counts independently and check every value
        # equals count / sqrt(total features).
        tokens = tokenize(code)
        vec = featurize(tokens, 1024)
        strings = [t.text for t in tokens] + [
            a.text + BIGRAM_SEPARATOR + b.text for a, b in zip(tokens, tokens[1:])
        ]
        expected: dict[int, int] = {}
        for s in strings:
            expected[bucket(s, 1024)] = expected.get(bucket(s, 1024), 0) + 1
        if not strings:
            assert vec.indices == ()
            return
        scale = 1.0 / math.sqrt(len(strings))
        assert dict(zip(vec.indices, vec.values)) == pytest.approx(
            {i: c * scale for i, c in expected.items()}
        )
        # Unit norm needs every feature in its own bucket: distinct strings
        # can still collide mod dim, which adds their counts.
        if len({bucket(s, 1024) for s in strings}) == len(strings):
            assert float(np.linalg.norm(vec.to_dense())) == pytest.approx(1.0)

    def test_order_sensitivity_through_bigrams(self):
        assert featurize(tokenize("a b c"), 4096) != featurize(tokenize("c b a"), 4096)


class TestFeaturizeChars:
    def test_windows_enumerated(self):
        # "abcd" has 3-grams abc, bcd and the 4-gram abcd: 4 features total.
        dim = 1024
        vec = featurize_chars("abcd", dim, min_n=3, max_n=5)
        scale = 1.0 / math.sqrt(4)
        dense = vec.to_dense()
        for gram in ("abc", "bcd", "abcd"):
            assert dense[bucket(gram, dim)] >= scale - 1e-12

    def test_short_text_yields_empty_vector(self):
        assert featurize_chars("ab", 1024).indices == ()

    def test_bad_range_rejected(self):
        with pytest.raises(ValueError):
            featurize_chars("abc", 1024, min_n=0, max_n=2)
        with pytest.raises(ValueError):
            featurize_chars("abc", 1024, min_n=4, max_n=3)

    @given(st.text(alphabet=st.sampled_from(list("abcxyz ")), min_size=0, max_size=60))
    @settings(max_examples=200, deadline=None)
    def test_total_count_matches_window_formula(self, text):
        vec = featurize_chars(text, 1024)
        total = sum(max(len(text) - n + 1, 0) for n in (3, 4, 5))
        if total == 0:
            assert vec.indices == ()
        else:
            counts = np.asarray(vec.values) * math.sqrt(total)
            assert counts.sum() == pytest.approx(total)
            assert np.allclose(counts, np.round(counts))
