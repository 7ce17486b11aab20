"""Shared plumbing for the four meta-classifier families.

Every model fits on a dense meta-feature matrix with labels in 0..4,
predicts five-column probability rows (absent training classes get
probability zero), and serializes to a self-describing JSON document
with a schema version so saved models outlive code changes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..corpus import NUM_CLASSES
from ..errors import DegenerateDataError

SCHEMA_VERSION = 1

KIND_ORDER = ("LR", "RF", "SVM", "GBT")
# GBT rows render under the gradient-boosting trade name.
KIND_LABELS = {"LR": "LR", "RF": "RF", "SVM": "SVM", "GBT": "XGBoost"}
KIND_ALIASES = {"XGBOOST": "GBT", "GBT": "GBT", "LR": "LR", "RF": "RF", "SVM": "SVM"}


def canonical_kind(name: str) -> str:
    try:
        return KIND_ALIASES[name.upper()]
    except KeyError:
        raise ValueError(
            f"unknown meta-classifier kind {name!r}; "
            f"expected one of {', '.join(KIND_ORDER)} (or XGBoost)"
        ) from None


def check_training_data(Z, y) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Validate and coerce a training set; returns (Z, y, present classes)."""
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y)
    if Z.ndim != 2:
        raise ValueError("feature matrix must be two-dimensional")
    if len(Z) != len(y):
        raise ValueError(
            f"row mismatch: {len(Z)} feature rows vs {len(y)} labels"
        )
    if len(Z) == 0:
        raise DegenerateDataError("empty training set")
    if not np.all(np.isfinite(Z)):
        raise ValueError("feature matrix must be finite")
    if not np.issubdtype(y.dtype, np.integer):
        raise ValueError("labels must be integers")
    if y.min() < 0 or y.max() >= NUM_CLASSES:
        raise ValueError(f"labels outside 0..{NUM_CLASSES - 1}")
    classes = tuple(sorted(set(y.tolist())))
    if len(classes) < 2:
        raise DegenerateDataError(
            f"training set holds a single class ({classes[0]}); "
            "at least two are required"
        )
    return Z, y.astype(np.int64), classes


def check_predict_input(Z, n_features: int) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != n_features:
        raise ValueError(f"expected shape (n, {n_features}), got {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise ValueError("feature matrix must be finite")
    return Z


def expand_to_all_classes(partial: np.ndarray, classes: tuple[int, ...]) -> np.ndarray:
    """Embed per-present-class columns into the full five-class layout."""
    full = np.zeros((len(partial), NUM_CLASSES))
    full[:, list(classes)] = partial
    return full


def save_model_dict(document: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_model_dict(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as handle:
        document = json.load(handle)
    version = document.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported model schema version {version!r} "
            f"(this build reads {SCHEMA_VERSION})"
        )
    return document
