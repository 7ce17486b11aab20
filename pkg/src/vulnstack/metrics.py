"""Evaluation metrics for five-class predictions.

All headline numbers are percentages.  Precision, recall, and F1 use
weighted averaging (class support over total); zero-denominator classes
score 0 and add a warning instead of raising.  Weighted recall is
computed as trace(confusion)/total, which is algebraically the weighted
average of per-class recalls but avoids the float round-trip, so it
equals accuracy exactly.

AUC is one-vs-rest via the Mann-Whitney statistic with average ranks,
crediting ties at 0.5, reported with both macro and weighted averaging.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal

import numpy as np

from .corpus import NUM_CLASSES


def format_percent(value: float) -> str:
    """Render a percentage at two decimals, rounding half to even."""
    return str(Decimal(repr(float(value))).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_EVEN
    ))


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    """5x5 count matrix, rows true class, columns predicted class."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.ndim != 1 or y_pred.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if len(y_true) != len(y_pred):
        raise ValueError(
            f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted"
        )
    if len(y_true) == 0:
        raise ValueError("empty label vectors")
    for name, arr in (("true", y_true), ("predicted", y_pred)):
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"{name} labels must be integers")
        if arr.min() < 0 or arr.max() >= NUM_CLASSES:
            raise ValueError(f"{name} labels outside 0..{NUM_CLASSES - 1}")
    matrix = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(matrix, (y_true, y_pred), 1)
    return matrix


@dataclass
class MetricSummary:
    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class_precision: tuple[float, ...]
    per_class_recall: tuple[float, ...]
    per_class_f1: tuple[float, ...]
    warnings: list[str] = field(default_factory=list)


def classification_metrics(matrix: np.ndarray) -> MetricSummary:
    """Accuracy plus weighted precision/recall/F1 from a confusion matrix."""
    matrix = np.asarray(matrix)
    if matrix.shape != (NUM_CLASSES, NUM_CLASSES):
        raise ValueError(f"expected a {NUM_CLASSES}x{NUM_CLASSES} matrix")
    total = int(matrix.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")

    support = matrix.sum(axis=1)
    predicted = matrix.sum(axis=0)
    true_pos = np.diag(matrix)
    warnings: list[str] = []

    precision = np.zeros(NUM_CLASSES)
    recall = np.zeros(NUM_CLASSES)
    f1 = np.zeros(NUM_CLASSES)
    for c in range(NUM_CLASSES):
        if predicted[c] > 0:
            precision[c] = true_pos[c] / predicted[c]
        elif support[c] > 0:
            warnings.append(f"precision undefined for class {c}; treated as 0")
        if support[c] > 0:
            recall[c] = true_pos[c] / support[c]
        if precision[c] + recall[c] > 0:
            f1[c] = 2 * precision[c] * recall[c] / (precision[c] + recall[c])
        elif support[c] > 0:
            warnings.append(f"F1 undefined for class {c}; treated as 0")

    accuracy = float(true_pos.sum() / total)
    weights = support / total
    # Support-weighted recall telescopes to trace/total; computing it that
    # way keeps the equality with accuracy exact in float arithmetic.
    weighted_recall = accuracy
    return MetricSummary(
        accuracy=100.0 * accuracy,
        precision=100.0 * float(weights @ precision),
        recall=100.0 * weighted_recall,
        f1=100.0 * float(weights @ f1),
        per_class_precision=tuple(100.0 * p for p in precision),
        per_class_recall=tuple(100.0 * r for r in recall),
        per_class_f1=tuple(100.0 * v for v in f1),
        warnings=warnings,
    )


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank block."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    start = 0
    for stop in range(1, len(values) + 1):
        if stop == len(values) or sorted_vals[stop] != sorted_vals[start]:
            mean_rank = 0.5 * (start + stop - 1) + 1.0
            ranks[order[start:stop]] = mean_rank
            start = stop
    return ranks


def auc_ovr(
    y_true,
    scores,
    average: str = "macro",
    allow_missing: bool = False,
) -> float:
    """One-vs-rest ROC AUC as a percentage.

    A class with no positives or no negatives has no defined AUC; that
    raises unless ``allow_missing`` is set, in which case the class is
    excluded and the averaging weights are renormalized.
    """
    value, _ = _auc_with_warnings(y_true, scores, average, allow_missing)
    return value


def _auc_with_warnings(
    y_true, scores, average: str, allow_missing: bool
) -> tuple[float, list[str]]:
    if average not in ("macro", "weighted"):
        raise ValueError(f"unknown averaging {average!r}")
    y_true = np.asarray(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] != NUM_CLASSES:
        raise ValueError(f"scores must have shape (n, {NUM_CLASSES})")
    if len(y_true) != len(scores):
        raise ValueError("labels and scores disagree on sample count")
    if len(y_true) == 0:
        raise ValueError("empty input")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")

    n = len(y_true)
    aucs, weights, warnings = [], [], []
    for c in range(NUM_CLASSES):
        positives = int((y_true == c).sum())
        negatives = n - positives
        if positives == 0 or negatives == 0:
            if not allow_missing:
                raise ValueError(
                    f"AUC undefined for class {c}: "
                    f"{positives} positive(s), {negatives} negative(s)"
                )
            if positives or negatives:
                warnings.append(
                    f"class {c} excluded from AUC averaging "
                    f"({positives} positive(s), {negatives} negative(s))"
                )
            continue
        ranks = _average_ranks(scores[:, c])
        rank_sum = float(ranks[y_true == c].sum())
        auc = (rank_sum - positives * (positives + 1) / 2.0) / (
            positives * negatives
        )
        aucs.append(auc)
        weights.append(positives if average == "weighted" else 1.0)
    if not aucs:
        raise ValueError("AUC undefined for every class")
    weight_arr = np.array(weights)
    value = 100.0 * float(np.array(aucs) @ (weight_arr / weight_arr.sum()))
    return value, warnings


@dataclass
class EvalReport:
    model: str
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc_macro: float
    auc_weighted: float
    confusion: list[list[int]]
    warnings: list[str] = field(default_factory=list)
    averaging: str = "weighted"

    def metric(self, name: str) -> float:
        if name not in (
            "accuracy", "precision", "recall", "f1", "auc_macro", "auc_weighted"
        ):
            raise ValueError(f"unknown metric {name!r}")
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc_macro": self.auc_macro,
            "auc_weighted": self.auc_weighted,
            "averaging": self.averaging,
            "confusion": [list(row) for row in self.confusion],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        return cls(
            model=data["model"],
            accuracy=data["accuracy"],
            precision=data["precision"],
            recall=data["recall"],
            f1=data["f1"],
            auc_macro=data["auc_macro"],
            auc_weighted=data["auc_weighted"],
            confusion=[list(row) for row in data["confusion"]],
            warnings=list(data.get("warnings", [])),
            averaging=data.get("averaging", "weighted"),
        )


def evaluate(
    y_true,
    probs,
    model: str = "",
    allow_missing_classes: bool = False,
) -> EvalReport:
    """Full report from true labels and per-class probabilities.

    Predictions are the probability argmax (ties resolve to the
    smallest class index, numpy convention).
    """
    probs = np.asarray(probs, dtype=np.float64)
    y_pred = probs.argmax(axis=1)
    matrix = confusion_matrix(y_true, y_pred)
    summary = classification_metrics(matrix)
    auc_macro, auc_warnings = _auc_with_warnings(
        y_true, probs, "macro", allow_missing_classes
    )
    auc_weighted, _ = _auc_with_warnings(
        y_true, probs, "weighted", allow_missing_classes
    )
    return EvalReport(
        model=model,
        accuracy=summary.accuracy,
        precision=summary.precision,
        recall=summary.recall,
        f1=summary.f1,
        auc_macro=auc_macro,
        auc_weighted=auc_weighted,
        confusion=[list(map(int, row)) for row in matrix],
        warnings=summary.warnings + auc_warnings,
    )
