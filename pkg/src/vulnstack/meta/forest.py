"""Random forest of Gini-split classification trees.

Each tree trains on a bootstrap resample and considers ceil(sqrt(d))
features per node, both drawn from a per-tree substream of the forest
seed, so a fixed seed reproduces the forest bit for bit.  Candidate
thresholds are midpoints between consecutive distinct sorted values;
ties in split quality keep the earliest candidate, which makes tree
construction deterministic.  Leaves store class counts and predict
their count fractions; the forest averages leaf distributions over
trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..corpus import NUM_CLASSES
from ..rng import derive
from .base import SCHEMA_VERSION, check_predict_input, check_training_data


@dataclass(frozen=True)
class RFParams:
    n_estimators: int = 200
    max_depth: int = 10
    min_samples_split: int = 2
    seed: int = 42

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")


class _TreeBuilder:
    def __init__(self, X, y_onehot, params: RFParams, rng):
        self.X = X
        self.y_onehot = y_onehot
        self.params = params
        self.rng = rng
        self.n_features = X.shape[1]
        self.m_features = math.ceil(math.sqrt(self.n_features))
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.counts: list[list[int]] = []

    def _new_node(self, counts: np.ndarray) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append([int(c) for c in counts])
        return len(self.feature) - 1

    def _draw_features(self) -> list[int]:
        pool = list(range(self.n_features))
        self.rng.shuffle(pool)
        return pool[: self.m_features]

    def _best_split(self, idx: np.ndarray, counts: np.ndarray):
        n = len(idx)
        parent_gini = 1.0 - float(((counts / n) ** 2).sum())
        onehot = self.y_onehot[idx]
        best = None
        best_gain = 0.0
        for f in self._draw_features():
            values = self.X[idx, f]
            order = np.argsort(values, kind="stable")
            sorted_vals = values[order]
            boundaries = sorted_vals[:-1] < sorted_vals[1:]
            if not boundaries.any():
                continue
            left_counts = np.cumsum(onehot[order], axis=0)[:-1]
            left_n = np.arange(1, n, dtype=np.float64)
            right_n = n - left_n
            right_counts = counts - left_counts
            gini_left = 1.0 - ((left_counts / left_n[:, None]) ** 2).sum(axis=1)
            gini_right = 1.0 - ((right_counts / right_n[:, None]) ** 2).sum(axis=1)
            gains = parent_gini - (left_n * gini_left + right_n * gini_right) / n
            gains[~boundaries] = -np.inf
            position = int(np.argmax(gains))
            if gains[position] > best_gain:
                low = float(sorted_vals[position])
                high = float(sorted_vals[position + 1])
                midpoint = 0.5 * (low + high)
                if midpoint >= high:  # adjacent floats can collapse the midpoint
                    midpoint = low
                best = (f, midpoint)
                best_gain = float(gains[position])
        return best

    def grow(self, idx: np.ndarray, depth: int) -> int:
        counts = self.y_onehot[idx].sum(axis=0)
        node = self._new_node(counts)
        if (
            depth >= self.params.max_depth
            or len(idx) < self.params.min_samples_split
            or int((counts > 0).sum()) <= 1
        ):
            return node
        split = self._best_split(idx, counts)
        if split is None:
            return node
        f, threshold = split
        goes_left = self.X[idx, f] <= threshold
        self.feature[node] = f
        self.threshold[node] = threshold
        self.left[node] = self.grow(idx[goes_left], depth + 1)
        self.right[node] = self.grow(idx[~goes_left], depth + 1)
        return node


@dataclass
class ClassificationTree:
    feature: np.ndarray  # (-1 marks a leaf)
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, NUM_CLASSES)

    def apply(self, Z: np.ndarray) -> np.ndarray:
        node = np.zeros(len(Z), dtype=np.int64)
        while True:
            internal = self.feature[node] >= 0
            if not internal.any():
                return node
            rows = np.flatnonzero(internal)
            at = node[rows]
            goes_left = Z[rows, self.feature[at]] <= self.threshold[at]
            node[rows] = np.where(goes_left, self.left[at], self.right[at])

    def predict_proba(self, Z: np.ndarray) -> np.ndarray:
        leaf_counts = self.counts[self.apply(Z)].astype(np.float64)
        return leaf_counts / leaf_counts.sum(axis=1, keepdims=True)

    def max_depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=np.int64)
        deepest = 0
        for node in range(len(self.feature)):  # preorder: parents precede children
            if self.feature[node] >= 0:
                for child in (self.left[node], self.right[node]):
                    depth[child] = depth[node] + 1
                    deepest = max(deepest, int(depth[child]))
        return deepest

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClassificationTree":
        return cls(
            feature=np.array(data["feature"], dtype=np.int64),
            threshold=np.array(data["threshold"], dtype=np.float64),
            left=np.array(data["left"], dtype=np.int64),
            right=np.array(data["right"], dtype=np.int64),
            counts=np.array(data["counts"], dtype=np.int64),
        )


@dataclass
class ForestModel:
    kind = "RF"
    params: RFParams
    n_features: int
    trees: list[ClassificationTree]

    def predict_proba(self, Z) -> np.ndarray:
        Z = check_predict_input(Z, self.n_features)
        total = np.zeros((len(Z), NUM_CLASSES))
        for tree in self.trees:
            total += tree.predict_proba(Z)
        return total / len(self.trees)

    def predict(self, Z) -> np.ndarray:
        return self.predict_proba(Z).argmax(axis=1)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "hyperparameters": {
                "n_estimators": self.params.n_estimators,
                "max_depth": self.params.max_depth,
                "min_samples_split": self.params.min_samples_split,
                "seed": self.params.seed,
            },
            "parameters": {
                "n_features": self.n_features,
                "trees": [tree.to_dict() for tree in self.trees],
            },
        }

    @classmethod
    def from_dict(cls, document: dict) -> "ForestModel":
        hp = document["hyperparameters"]
        p = document["parameters"]
        return cls(
            params=RFParams(
                n_estimators=hp["n_estimators"],
                max_depth=hp["max_depth"],
                min_samples_split=hp["min_samples_split"],
                seed=hp["seed"],
            ),
            n_features=p["n_features"],
            trees=[ClassificationTree.from_dict(t) for t in p["trees"]],
        )


def fit_rf(Z, y, params: RFParams | None = None) -> ForestModel:
    params = params or RFParams()
    Z, y, _ = check_training_data(Z, y)
    n = len(Z)
    y_onehot = np.zeros((n, NUM_CLASSES), dtype=np.int64)
    y_onehot[np.arange(n), y] = 1

    trees = []
    for index in range(params.n_estimators):
        rng = derive(params.seed, f"tree/{index}")
        bootstrap = np.array([rng.next_below(n) for _ in range(n)], dtype=np.int64)
        builder = _TreeBuilder(Z[bootstrap], y_onehot[bootstrap], params, rng)
        builder.grow(np.arange(n, dtype=np.int64), depth=0)
        trees.append(
            ClassificationTree(
                feature=np.array(builder.feature, dtype=np.int64),
                threshold=np.array(builder.threshold, dtype=np.float64),
                left=np.array(builder.left, dtype=np.int64),
                right=np.array(builder.right, dtype=np.int64),
                counts=np.array(builder.counts, dtype=np.int64),
            )
        )
    return ForestModel(params=params, n_features=Z.shape[1], trees=trees)
