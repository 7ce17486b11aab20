"""Labeled source-code corpora and the split/downsample operations.

A corpus is an ordered collection of (id, code, label) records with
unique ids and labels in 0..4.  The five labels name vulnerability
categories: CWE-119, CWE-120, CWE-469, CWE-476, and a residual
CWE-other bucket.

Two on-disk formats are supported.  JSONL holds one object per line
with keys ``id``, ``code``, ``label``.  CSV is RFC-4180 with a header
naming at least the columns ``id``, ``code``, ``label``.  Loader errors
name the offending line.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import CorpusError, SplitError
from .rng import derive

NUM_CLASSES = 5
CLASS_NAMES = ("CWE-119", "CWE-120", "CWE-469", "CWE-476", "CWE-other")

RATIO_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CodeSample:
    id: str
    code: str
    label: int

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise CorpusError(f"sample id must be a non-empty string, got {self.id!r}")
        if isinstance(self.label, bool) or not isinstance(self.label, int):
            raise CorpusError(f"sample {self.id!r}: label must be an integer")
        if not 0 <= self.label < NUM_CLASSES:
            raise CorpusError(
                f"sample {self.id!r}: label {self.label} outside 0..{NUM_CLASSES - 1}"
            )


@dataclass(frozen=True)
class ClassDistribution:
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) != NUM_CLASSES:
            raise ValueError(f"expected {NUM_CLASSES} counts, got {len(self.counts)}")

    @property
    def total(self) -> int:
        return sum(self.counts)

    @classmethod
    def from_labels(cls, labels: Iterable[int]) -> "ClassDistribution":
        counts = [0] * NUM_CLASSES
        for label in labels:
            counts[label] += 1
        return cls(tuple(counts))

    def to_dict(self) -> dict:
        return {"counts": list(self.counts), "total": self.total}


@dataclass(frozen=True)
class Corpus:
    samples: tuple[CodeSample, ...]
    provenance: str = ""

    def __post_init__(self):
        seen: set[str] = set()
        for sample in self.samples:
            if sample.id in seen:
                raise CorpusError(f"duplicate sample id {sample.id!r}")
            seen.add(sample.id)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[CodeSample]:
        return iter(self.samples)

    def ids(self) -> tuple[str, ...]:
        return tuple(sample.id for sample in self.samples)

    def labels(self) -> tuple[int, ...]:
        return tuple(sample.label for sample in self.samples)

    def distribution(self) -> ClassDistribution:
        return ClassDistribution.from_labels(self.labels())

    @classmethod
    def from_samples(
        cls, samples: Iterable[CodeSample], provenance: str = ""
    ) -> "Corpus":
        return cls(tuple(samples), provenance)


@dataclass(frozen=True)
class SplitSet:
    train: Corpus
    validation: Corpus
    test: Corpus
    seed: int
    ratios: tuple[float, float, float]

    def members(self) -> dict[str, Corpus]:
        return {
            "train": self.train,
            "validation": self.validation,
            "test": self.test,
        }


def _parse_label(raw, where: str) -> int:
    if isinstance(raw, bool):
        raise CorpusError(f"{where}: label must be an integer, got {raw!r}")
    if isinstance(raw, int):
        label = raw
    elif isinstance(raw, str):
        try:
            label = int(raw.strip())
        except ValueError:
            raise CorpusError(f"{where}: label {raw!r} is not an integer") from None
    else:
        raise CorpusError(f"{where}: label must be an integer, got {raw!r}")
    if not 0 <= label < NUM_CLASSES:
        raise CorpusError(f"{where}: label {label} outside 0..{NUM_CLASSES - 1}")
    return label


def _load_jsonl(path: Path) -> list[CodeSample]:
    samples = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            where = f"{path.name} line {lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: malformed JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise CorpusError(f"{where}: record is not an object")
            for key in ("id", "code", "label"):
                if key not in record:
                    raise CorpusError(f"{where}: missing field {key!r}")
            if not isinstance(record["code"], str):
                raise CorpusError(f"{where}: code must be a string")
            samples.append(
                CodeSample(
                    id=str(record["id"]),
                    code=record["code"],
                    label=_parse_label(record["label"], where),
                )
            )
    return samples


def _load_csv(path: Path) -> list[CodeSample]:
    samples = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            return []
        missing = {"id", "code", "label"} - set(reader.fieldnames)
        if missing:
            raise CorpusError(
                f"{path.name}: header missing column(s) {sorted(missing)}"
            )
        for record in reader:
            where = f"{path.name} line {reader.line_num}"
            if record["id"] is None or record["code"] is None or record["label"] is None:
                raise CorpusError(f"{where}: short row")
            samples.append(
                CodeSample(
                    id=record["id"],
                    code=record["code"],
                    label=_parse_label(record["label"], where),
                )
            )
    return samples


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Load a corpus file.  ``format`` is ``jsonl`` or ``csv``."""
    path = Path(path)
    if format == "jsonl":
        samples = _load_jsonl(path)
    elif format == "csv":
        samples = _load_csv(path)
    else:
        raise ValueError(f"unknown corpus format {format!r}")
    return Corpus.from_samples(samples, provenance=f"{path}:{format}")


def write_corpus_jsonl(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for sample in corpus:
            handle.write(
                json.dumps(
                    {"id": sample.id, "code": sample.code, "label": sample.label},
                    ensure_ascii=False,
                )
                + "\n"
            )


def clean(corpus: Corpus) -> Corpus:
    """Drop samples whose code is whitespace-only or whose label is absent.

    Surviving samples pass through unchanged, so the operation is
    idempotent.
    """
    kept = tuple(
        sample
        for sample in corpus
        if sample.label is not None and sample.code.strip()
    )
    return Corpus(kept, corpus.provenance)


def _apportion(total: int, ratios: Sequence[float]) -> list[int]:
    # Largest-remainder rounding: floor everything, then hand the leftover
    # units to the largest fractional parts (ties go to the earlier member).
    exact = [ratio * total for ratio in ratios]
    counts = [math.floor(x) for x in exact]
    leftover = total - sum(counts)
    order = sorted(
        range(len(ratios)), key=lambda i: (-(exact[i] - counts[i]), i)
    )
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def stratified_split(
    corpus: Corpus, ratios: Sequence[float], seed: int
) -> SplitSet:
    """Split into train/validation/test preserving class proportions.

    Membership is keyed on sample ids: within each class the ids are
    sorted, shuffled by a class-specific substream of ``seed``, and cut
    by largest-remainder apportionment of the ratios.  Each member
    corpus is emitted sorted by id, so the result is invariant to the
    input sample order.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise SplitError(f"expected 3 ratios, got {len(ratios)}")
    if any(r <= 0 for r in ratios):
        raise SplitError(f"ratios must be positive, got {ratios}")
    if abs(sum(ratios) - 1.0) > RATIO_TOLERANCE:
        raise SplitError(f"ratios must sum to 1, got {sum(ratios)!r}")

    by_class: dict[int, list[CodeSample]] = {c: [] for c in range(NUM_CLASSES)}
    for sample in corpus:
        by_class[sample.label].append(sample)

    members: tuple[list[CodeSample], ...] = ([], [], [])
    for label in range(NUM_CLASSES):
        group = sorted(by_class[label], key=lambda s: s.id)
        if not group:
            continue
        if len(group) < 3:
            raise SplitError(
                f"class {label} has {len(group)} sample(s); need at least 3 "
                "to populate three split members"
            )
        derive(seed, f"split/{label}").shuffle(group)
        counts = _apportion(len(group), ratios)
        start = 0
        for member, count in zip(members, counts):
            member.extend(group[start : start + count])
            start += count

    corpora = tuple(
        Corpus(
            tuple(sorted(member, key=lambda s: s.id)),
            provenance=f"{corpus.provenance}#{name}",
        )
        for member, name in zip(members, ("train", "validation", "test"))
    )
    return SplitSet(*corpora, seed=seed, ratios=ratios)


def downsample(
    corpus: Corpus, cap: int | Sequence[int], seed: int
) -> Corpus:
    """Cap each class at a maximum count by uniform sampling.

    ``cap`` is either one integer applied to every class or a sequence
    of five per-class caps.  Classes at or under their cap keep all
    samples; over-cap classes keep a uniform without-replacement
    selection drawn from a class-specific substream of ``seed``.  The
    survivors stay in input order.
    """
    if isinstance(cap, bool) or isinstance(cap, float):
        raise ValueError("cap must be an integer or a sequence of integers")
    if isinstance(cap, int):
        caps = [cap] * NUM_CLASSES
    else:
        caps = [int(c) for c in cap]
        if len(caps) != NUM_CLASSES:
            raise ValueError(f"expected {NUM_CLASSES} caps, got {len(caps)}")
    if any(c < 1 for c in caps):
        raise ValueError(f"caps must be >= 1, got {caps}")

    positions: dict[int, list[int]] = {c: [] for c in range(NUM_CLASSES)}
    for index, sample in enumerate(corpus):
        positions[sample.label].append(index)

    keep: set[int] = set()
    for label in range(NUM_CLASSES):
        group = positions[label]
        if len(group) <= caps[label]:
            keep.update(group)
        else:
            rng = derive(seed, f"downsample/{label}")
            chosen = rng.sample(len(group), caps[label])
            keep.update(group[i] for i in chosen)

    kept = tuple(sample for i, sample in enumerate(corpus) if i in keep)
    return Corpus(kept, corpus.provenance)


def split_manifest(split: SplitSet) -> dict:
    """JSON-ready manifest recording seed, ratios, and member ids."""
    return {
        "seed": split.seed,
        "ratios": list(split.ratios),
        "members": {
            name: list(member.ids()) for name, member in split.members().items()
        },
    }


def write_split_manifest(split: SplitSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(split_manifest(split), handle, indent=2, sort_keys=True)
        handle.write("\n")
