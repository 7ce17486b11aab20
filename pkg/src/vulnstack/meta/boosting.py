"""Second-order softmax gradient-boosted trees.

Scores start at the log class priors.  Each round computes per-class
gradients g = p - 1[y=c] and hessians h = p(1 - p) of the multinomial
log-loss, fits one depth-capped regression tree per present class by
exact greedy search on the gain

    0.5 * (GL^2/(HL + lambda) + GR^2/(HR + lambda) - G^2/(H + lambda)),

requires each child to carry at least ``min_child_weight`` of hessian
mass, and sets leaf weights to -G/(H + lambda).  The learning rate
scales every tree; if a round would raise the recorded training
log-loss the applied factor is halved until it does not (a factor can
reach zero, making the round a recorded no-op).  The stored log-loss
history is therefore non-increasing.  Training uses no randomness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import (
    SCHEMA_VERSION,
    check_predict_input,
    check_training_data,
    expand_to_all_classes,
)

_MAX_HALVINGS = 50


@dataclass(frozen=True)
class GBTParams:
    n_estimators: int = 100
    learning_rate: float = 0.1
    max_depth: int = 6
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0

    def __post_init__(self):
        if self.n_estimators < 0:
            raise ValueError("n_estimators must be >= 0")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")
        if self.min_child_weight < 0:
            raise ValueError("min_child_weight must be >= 0")


@dataclass
class RegressionTree:
    feature: np.ndarray  # (-1 marks a leaf)
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # leaf weight, 0.0 on internal nodes

    def predict(self, Z: np.ndarray) -> np.ndarray:
        node = np.zeros(len(Z), dtype=np.int64)
        while True:
            internal = self.feature[node] >= 0
            if not internal.any():
                return self.value[node]
            rows = np.flatnonzero(internal)
            at = node[rows]
            goes_left = Z[rows, self.feature[at]] <= self.threshold[at]
            node[rows] = np.where(goes_left, self.left[at], self.right[at])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RegressionTree":
        return cls(
            feature=np.array(data["feature"], dtype=np.int64),
            threshold=np.array(data["threshold"], dtype=np.float64),
            left=np.array(data["left"], dtype=np.int64),
            right=np.array(data["right"], dtype=np.int64),
            value=np.array(data["value"], dtype=np.float64),
        )


class _RegressionTreeBuilder:
    def __init__(self, X, grad, hess, params: GBTParams):
        self.X = X
        self.grad = grad
        self.hess = hess
        self.params = params
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _new_node(self, g_sum: float, h_sum: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(-g_sum / (h_sum + self.params.reg_lambda))
        return len(self.feature) - 1

    def _best_split(self, idx: np.ndarray, g_sum: float, h_sum: float):
        lam = self.params.reg_lambda
        min_h = self.params.min_child_weight
        parent_score = (g_sum * g_sum) / (h_sum + lam)
        g = self.grad[idx]
        h = self.hess[idx]
        best = None
        best_gain = 0.0
        for f in range(self.X.shape[1]):
            values = self.X[idx, f]
            order = np.argsort(values, kind="stable")
            sorted_vals = values[order]
            boundaries = sorted_vals[:-1] < sorted_vals[1:]
            if not boundaries.any():
                continue
            g_left = np.cumsum(g[order])[:-1]
            h_left = np.cumsum(h[order])[:-1]
            g_right = g_sum - g_left
            h_right = h_sum - h_left
            gains = 0.5 * (
                (g_left * g_left) / (h_left + lam)
                + (g_right * g_right) / (h_right + lam)
                - parent_score
            )
            allowed = boundaries & (h_left >= min_h) & (h_right >= min_h)
            gains = np.where(allowed, gains, -np.inf)
            position = int(np.argmax(gains))
            if gains[position] > best_gain:
                low = float(sorted_vals[position])
                high = float(sorted_vals[position + 1])
                midpoint = 0.5 * (low + high)
                if midpoint >= high:
                    midpoint = low
                best = (f, midpoint)
                best_gain = float(gains[position])
        return best

    def grow(self, idx: np.ndarray, depth: int) -> int:
        g_sum = float(self.grad[idx].sum())
        h_sum = float(self.hess[idx].sum())
        node = self._new_node(g_sum, h_sum)
        if depth >= self.params.max_depth or len(idx) < 2:
            return node
        split = self._best_split(idx, g_sum, h_sum)
        if split is None:
            return node
        f, threshold = split
        goes_left = self.X[idx, f] <= threshold
        self.feature[node] = f
        self.threshold[node] = threshold
        self.value[node] = 0.0
        self.left[node] = self.grow(idx[goes_left], depth + 1)
        self.right[node] = self.grow(idx[~goes_left], depth + 1)
        return node


def _fit_regression_tree(X, grad, hess, params: GBTParams) -> RegressionTree:
    builder = _RegressionTreeBuilder(X, grad, hess, params)
    builder.grow(np.arange(len(X), dtype=np.int64), depth=0)
    return RegressionTree(
        feature=np.array(builder.feature, dtype=np.int64),
        threshold=np.array(builder.threshold, dtype=np.float64),
        left=np.array(builder.left, dtype=np.int64),
        right=np.array(builder.right, dtype=np.int64),
        value=np.array(builder.value, dtype=np.float64),
    )


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _log_loss(scores: np.ndarray, y_col: np.ndarray) -> float:
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(log_norm - shifted[np.arange(len(y_col)), y_col]))


@dataclass
class GBTModel:
    kind = "GBT"
    params: GBTParams
    classes: tuple[int, ...]
    priors: np.ndarray  # log prior per present class
    rounds: list[tuple[float, list[RegressionTree]]]  # (applied factor, trees)
    loss_history: list[float]
    n_features: int

    def _scores(self, Z: np.ndarray) -> np.ndarray:
        scores = np.tile(self.priors, (len(Z), 1))
        for factor, trees in self.rounds:
            if factor == 0.0:
                continue
            for column, tree in enumerate(trees):
                scores[:, column] += factor * tree.predict(Z)
        return scores

    def predict_proba(self, Z) -> np.ndarray:
        Z = check_predict_input(Z, self.n_features)
        return expand_to_all_classes(_softmax(self._scores(Z)), self.classes)

    def predict(self, Z) -> np.ndarray:
        return self.predict_proba(Z).argmax(axis=1)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "hyperparameters": {
                "n_estimators": self.params.n_estimators,
                "learning_rate": self.params.learning_rate,
                "max_depth": self.params.max_depth,
                "reg_lambda": self.params.reg_lambda,
                "min_child_weight": self.params.min_child_weight,
            },
            "parameters": {
                "classes": list(self.classes),
                "priors": self.priors.tolist(),
                "n_features": self.n_features,
                "loss_history": list(self.loss_history),
                "rounds": [
                    {
                        "factor": factor,
                        "trees": [tree.to_dict() for tree in trees],
                    }
                    for factor, trees in self.rounds
                ],
            },
        }

    @classmethod
    def from_dict(cls, document: dict) -> "GBTModel":
        hp = document["hyperparameters"]
        p = document["parameters"]
        return cls(
            params=GBTParams(
                n_estimators=hp["n_estimators"],
                learning_rate=hp["learning_rate"],
                max_depth=hp["max_depth"],
                reg_lambda=hp["reg_lambda"],
                min_child_weight=hp["min_child_weight"],
            ),
            classes=tuple(p["classes"]),
            priors=np.array(p["priors"], dtype=np.float64),
            rounds=[
                (
                    r["factor"],
                    [RegressionTree.from_dict(t) for t in r["trees"]],
                )
                for r in p["rounds"]
            ],
            loss_history=list(p["loss_history"]),
            n_features=p["n_features"],
        )


def fit_gbt(Z, y, params: GBTParams | None = None) -> GBTModel:
    params = params or GBTParams()
    Z, y, classes = check_training_data(Z, y)
    n = len(Z)
    k = len(classes)
    column_of = {cls_label: i for i, cls_label in enumerate(classes)}
    y_col = np.array([column_of[label] for label in y.tolist()], dtype=np.int64)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y_col] = 1.0

    priors = np.log(np.bincount(y_col, minlength=k) / n)
    scores = np.tile(priors, (n, 1))
    history = [_log_loss(scores, y_col)]
    rounds: list[tuple[float, list[RegressionTree]]] = []

    for _ in range(params.n_estimators):
        probs = _softmax(scores)
        trees = []
        updates = np.empty_like(scores)
        for column in range(k):
            grad = probs[:, column] - onehot[:, column]
            hess = probs[:, column] * (1.0 - probs[:, column])
            tree = _fit_regression_tree(Z, grad, hess, params)
            trees.append(tree)
            updates[:, column] = tree.predict(Z)

        # Halve the applied factor until the round does not raise the
        # training loss; factor 0 records a no-op round.
        factor = params.learning_rate
        previous = history[-1]
        accepted = previous
        for _ in range(_MAX_HALVINGS):
            loss = _log_loss(scores + factor * updates, y_col)
            if loss <= previous + 1e-12:
                accepted = loss
                break
            factor *= 0.5
        else:
            factor = 0.0
        if factor != 0.0:
            scores += factor * updates
        rounds.append((factor, trees))
        history.append(accepted)

    return GBTModel(
        params=params,
        classes=classes,
        priors=priors,
        rounds=rounds,
        loss_history=history,
        n_features=Z.shape[1],
    )
