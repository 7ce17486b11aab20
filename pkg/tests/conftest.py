"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from synth import complementary_corpus
from vulnstack.corpus import Corpus, stratified_split


@pytest.fixture(scope="session")
def small_corpus() -> Corpus:
    return complementary_corpus(n=300, seed=3)


@pytest.fixture(scope="session")
def small_splits(small_corpus):
    return stratified_split(small_corpus, seed=5, ratios=(0.8, 0.1, 0.1))


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
