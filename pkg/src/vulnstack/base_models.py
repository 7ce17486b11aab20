"""Base models that map a code sample to a five-class probability vector.

Two kinds of built-in model train here, differing only in how they
featurize:

* ``hashed-token-softmax``: token unigram/bigram features,
* ``char-ngram-softmax``: character 3..5-gram features,

each feeding a multinomial logistic (softmax) layer fit by full-batch
gradient descent with a halving line search, so the recorded loss
history never increases.  Training is deterministic: zero
initialization, fixed iteration order, no sampling.

External models contribute precomputed probabilities through a JSONL
wire format: a header line ``{"model": name, "classes": 5}`` followed
by one ``{"id": ..., "probs": [p0..p4]}`` row per sample.  Rows whose
probabilities sum within 1e-3 of 1 are renormalized; anything further
off is rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy import sparse

from .corpus import NUM_CLASSES, CodeSample, Corpus
from .errors import DegenerateDataError, ProbFormatError
from .features import FeatureVector, check_dim, featurize, featurize_chars
from .lexer import tokenize

BUILTIN_KINDS = ("hashed-token-softmax", "char-ngram-softmax")

PROB_SUM_TOLERANCE = 1e-3
_MAX_HALVINGS = 40


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 4096
    epochs: int = 200
    learning_rate: float = 0.5
    l2: float = 1e-4
    seed: int = 0  # reserved for stochastic variants; full-batch fit ignores it

    def __post_init__(self):
        check_dim(self.dim)
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")


def _featurize_code(kind: str, code: str, dim: int) -> FeatureVector:
    if kind == "hashed-token-softmax":
        return featurize(tokenize(code), dim)
    if kind == "char-ngram-softmax":
        return featurize_chars(code, dim)
    raise ValueError(f"unknown builtin kind {kind!r}")


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


@dataclass
class SoftmaxModel:
    name: str
    kind: str
    config: TrainConfig
    weights: np.ndarray  # (dim, NUM_CLASSES)
    bias: np.ndarray  # (NUM_CLASSES,)
    loss_history: list[float] = field(default_factory=list)

    def featurize_sample(self, code: str) -> FeatureVector:
        return _featurize_code(self.kind, code, self.config.dim)

    def predict_proba(self, sample: CodeSample) -> np.ndarray:
        fv = self.featurize_sample(sample.code)
        logits = self.bias.copy()
        if fv.indices:
            logits = logits + np.asarray(fv.values) @ self.weights[list(fv.indices)]
        return _softmax(logits[None, :])[0]


@dataclass
class ProbTable:
    model: str
    rows: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class ExternalModel:
    name: str
    table: ProbTable

    def predict_proba(self, sample: CodeSample) -> np.ndarray:
        try:
            return self.table.rows[sample.id]
        except KeyError:
            raise KeyError(
                f"external model {self.name!r} has no probabilities for "
                f"sample {sample.id!r}"
            ) from None


BaseModel = Union[SoftmaxModel, ExternalModel]


def _objective(
    X, Y: np.ndarray, weights: np.ndarray, bias: np.ndarray, l2: float
) -> float:
    logits = X @ weights + bias
    log_norm = np.logaddexp.reduce(logits, axis=1)
    cross_entropy = float(np.mean(log_norm - (logits * Y).sum(axis=1)))
    return cross_entropy + 0.5 * l2 * float((weights * weights).sum())


def train_builtin(
    kind: str,
    train: Corpus,
    config: TrainConfig | None = None,
    name: str | None = None,
) -> SoftmaxModel:
    """Fit a built-in base model on a training corpus.

    Requires at least two distinct labels; a single-class corpus cannot
    anchor the softmax and raises ``DegenerateDataError``.
    """
    if kind not in BUILTIN_KINDS:
        raise ValueError(f"unknown builtin kind {kind!r}")
    config = config or TrainConfig()
    if len(train) == 0:
        raise DegenerateDataError("training corpus is empty")
    labels = np.array(train.labels())
    if len(set(labels.tolist())) < 2:
        raise DegenerateDataError(
            f"training corpus holds a single class ({labels[0]}); "
            "at least two are required"
        )

    rows, cols, vals = [], [], []
    for i, sample in enumerate(train):
        fv = _featurize_code(kind, sample.code, config.dim)
        rows.extend([i] * len(fv.indices))
        cols.extend(fv.indices)
        vals.extend(fv.values)
    X = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(train), config.dim), dtype=np.float64
    )
    Y = np.zeros((len(train), NUM_CLASSES))
    Y[np.arange(len(train)), labels] = 1.0

    weights = np.zeros((config.dim, NUM_CLASSES))
    bias = np.zeros(NUM_CLASSES)
    history = [_objective(X, Y, weights, bias, config.l2)]

    for _ in range(config.epochs):
        probs = _softmax(np.asarray(X @ weights) + bias)
        residual = (probs - Y) / len(train)
        grad_w = np.asarray(X.T @ residual) + config.l2 * weights
        grad_b = residual.sum(axis=0)

        # Halving line search keeps the recorded loss non-increasing.
        step = config.learning_rate
        current = history[-1]
        accepted = current
        for _ in range(_MAX_HALVINGS):
            w_try = weights - step * grad_w
            b_try = bias - step * grad_b
            loss = _objective(X, Y, w_try, b_try, config.l2)
            if loss <= current + 1e-12:
                weights, bias, accepted = w_try, b_try, loss
                break
            step *= 0.5
        history.append(accepted)

    return SoftmaxModel(
        name=name or kind,
        kind=kind,
        config=config,
        weights=weights,
        bias=bias,
        loss_history=history,
    )


def predict_proba_base(model: BaseModel, sample: CodeSample) -> np.ndarray:
    """Probability vector of one sample under one base model."""
    return model.predict_proba(sample)


def _parse_prob_row(record: dict, where: str) -> tuple[str, np.ndarray]:
    for key in ("id", "probs"):
        if key not in record:
            raise ProbFormatError(f"{where}: missing field {key!r}")
    probs = record["probs"]
    if not isinstance(probs, list) or len(probs) != NUM_CLASSES:
        raise ProbFormatError(
            f"{where}: probs must be a list of {NUM_CLASSES} numbers"
        )
    values = []
    for p in probs:
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            raise ProbFormatError(f"{where}: non-numeric probability {p!r}")
        values.append(float(p))
    arr = np.array(values)
    if not np.all(np.isfinite(arr)):
        raise ProbFormatError(f"{where}: non-finite probability")
    if np.any(arr < 0):
        raise ProbFormatError(f"{where}: negative probability")
    total = float(arr.sum())
    if abs(total - 1.0) > PROB_SUM_TOLERANCE:
        raise ProbFormatError(
            f"{where}: probabilities sum to {total!r}, "
            f"outside 1 +/- {PROB_SUM_TOLERANCE}"
        )
    return str(record["id"]), arr / total


def load_external_probs(path: str | Path) -> ProbTable:
    """Read a probability file in the JSONL wire format."""
    path = Path(path)
    model_name = None
    table: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            where = f"{path.name} line {lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ProbFormatError(f"{where}: malformed JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise ProbFormatError(f"{where}: record is not an object")
            if model_name is None:
                if "model" not in record or "classes" not in record:
                    raise ProbFormatError(
                        f"{where}: first line must be a header with "
                        "'model' and 'classes'"
                    )
                if record["classes"] != NUM_CLASSES:
                    raise ProbFormatError(
                        f"{where}: expected classes={NUM_CLASSES}, "
                        f"got {record['classes']!r}"
                    )
                model_name = str(record["model"])
                continue
            sample_id, probs = _parse_prob_row(record, where)
            if sample_id in table:
                raise ProbFormatError(f"{where}: duplicate id {sample_id!r}")
            table[sample_id] = probs
    if model_name is None:
        raise ProbFormatError(f"{path.name}: missing header line")
    return ProbTable(model=model_name, rows=table)


def write_prob_table(table: ProbTable, path: str | Path) -> None:
    """Write a probability table in the JSONL wire format."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(
            json.dumps({"model": table.model, "classes": NUM_CLASSES}) + "\n"
        )
        for sample_id, probs in table.rows.items():
            handle.write(
                json.dumps({"id": sample_id, "probs": [float(p) for p in probs]})
                + "\n"
            )


def prob_table_from_model(
    model: BaseModel, corpus: Corpus, name: str | None = None
) -> ProbTable:
    """Score a corpus with a model and collect the rows into a table."""
    rows = {s.id: predict_proba_base(model, s) for s in corpus}
    return ProbTable(model=name or model.name, rows=rows)
