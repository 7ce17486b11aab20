"""Synthetic corpora and probability tables for tests.

``complementary_corpus`` builds samples whose class is recoverable from
exactly one feature family per region:

* token region: the class is encoded by the order of three fixed words;
  their multiset is constant, and every character window short enough
  for the n-gram featurizer occurs equally often in all five orders, so
  character features carry no signal.
* char region: the class is encoded by a repeated three-character
  marker ("zq" + digit) embedded inside identifiers that are unique per
  sample, so hashed token features generalize at chance.
* shared region: both encodings appear.

With the default region mix each base model sees signal on about 5/8
of samples and is blind on the rest, landing its accuracy near 70%,
while a stack over both models approaches the Bayes rate.
"""

from __future__ import annotations

import numpy as np

from vulnstack.base_models import ProbTable
from vulnstack.corpus import CodeSample, Corpus
from vulnstack.rng import SplitMix64

# Noise identifiers avoid q and z so the "zq" char marker can never
# occur by accident; stray x/y collisions with the order words are
# label-independent and only add symmetric noise.
_NOISE_ALPHABET = "abcdefghijklmnoprstuvwxy".replace("q", "").replace("z", "")


def _noise_word(rng: SplitMix64, length: int = 6) -> str:
    return "".join(
        _NOISE_ALPHABET[rng.next_below(len(_NOISE_ALPHABET))]
        for _ in range(length)
    )


# One three-word permutation per class, padded by sentinel words. Token
# bigrams identify the permutation, but every 3..5-char window occurs the
# same number of times in all five orders (letters sit six characters
# apart and each word has both neighbors), so char n-gram counts carry no
# class signal here.
_PERMS = ("abc", "acb", "bac", "bca", "cab")


def _token_order_lines(label: int) -> list[str]:
    inner = " ".join(f"xx{ch}yy" for ch in _PERMS[label])
    # Repeating the line gives the order bigrams enough feature mass to
    # compete with the per-sample noise.
    return [f"  xxqyy {inner} xxqyy;"] * 3


def _char_marker_line(rng: SplitMix64, label: int) -> str:
    marker = f"zq{label}" * 3
    return f"  {_noise_word(rng, 4)}{marker}{_noise_word(rng, 4)} = 1;"


def complementary_sample(rng: SplitMix64, label: int, index: int) -> CodeSample:
    region = rng.next_below(8)  # 0..2 token, 3..5 char, 6..7 both
    # The function name must not encode the label (index % 5), so it is
    # drawn from the noise alphabet instead of the running index.
    lines = [f"int {_noise_word(rng, 8)}() {{"]
    for _ in range(2):
        lines.append(f"  {_noise_word(rng)} = {rng.next_below(1000)};")
    if region < 3 or region >= 6:
        lines.extend(_token_order_lines(label))
    if region >= 3:
        lines.append(_char_marker_line(rng, label))
    lines.append("  return 0;")
    lines.append("}")
    return CodeSample(id=f"s{index:05d}", code="\n".join(lines), label=label)


def complementary_corpus(n: int = 2000, seed: int = 7) -> Corpus:
    rng = SplitMix64(seed)
    samples = [complementary_sample(rng, index % 5, index) for index in range(n)]
    return Corpus.from_samples(samples, provenance=f"synthetic:{seed}")


def balanced_marker_corpus(n: int = 500, seed: int = 3) -> Corpus:
    """Every sample carries a clean token marker for its class."""
    rng = SplitMix64(seed)
    samples = []
    for index in range(n):
        label = index % 5
        body = [
            f"void g{index}(int a) {{",
            f"  marker_{label} = a + {rng.next_below(100)};",
            f"  {_noise_word(rng)} = {_noise_word(rng)};",
            "}",
        ]
        samples.append(
            CodeSample(id=f"m{index:05d}", code="\n".join(body), label=label)
        )
    return Corpus.from_samples(samples, provenance=f"marker:{seed}")


def peaked_table(name: str, corpus: Corpus, rng: np.random.Generator) -> ProbTable:
    """Probability rows concentrated on the true label, so meta-classifier
    fits on them converge fast."""
    rows = {}
    for sample in corpus:
        v = 0.3 * rng.dirichlet(np.ones(5))
        v[sample.label] += 0.7
        rows[sample.id] = v / v.sum()
    return ProbTable(name, rows)


def table_shaped_corpus(counts: tuple[int, ...], seed: int = 11) -> Corpus:
    """A corpus with the exact per-class counts given."""
    rng = SplitMix64(seed)
    samples = []
    index = 0
    for label, count in enumerate(counts):
        for _ in range(count):
            samples.append(
                CodeSample(
                    id=f"t{index:06d}",
                    code=f"int v{index} = {rng.next_below(10_000)};",
                    label=label,
                )
            )
            index += 1
    return Corpus.from_samples(samples, provenance=f"shaped:{seed}")
