"""Meta-classifiers that combine base-model probabilities.

Four families share one fit/predict surface: L2 logistic regression
(``LR``), a Gini random forest (``RF``), an RBF-kernel SVM with
calibrated probabilities (``SVM``), and second-order gradient-boosted
trees (``GBT``, rendered as XGBoost in report tables).
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np

from .base import (
    KIND_LABELS,
    KIND_ORDER,
    SCHEMA_VERSION,
    canonical_kind,
    load_model_dict,
    save_model_dict,
)
from .boosting import GBTModel, GBTParams, fit_gbt
from .forest import ForestModel, RFParams, fit_rf
from .logistic import LogisticModel, LRParams, fit_lr
from .svm import SVMModel, SVMParams, fit_svm

MetaModel = Union[LogisticModel, ForestModel, SVMModel, GBTModel]
MetaParams = Union[LRParams, RFParams, SVMParams, GBTParams]

_FITTERS = {"LR": fit_lr, "RF": fit_rf, "SVM": fit_svm, "GBT": fit_gbt}
_PARAM_TYPES = {"LR": LRParams, "RF": RFParams, "SVM": SVMParams, "GBT": GBTParams}
_MODEL_TYPES = {
    "LR": LogisticModel,
    "RF": ForestModel,
    "SVM": SVMModel,
    "GBT": GBTModel,
}


def default_params(kind: str) -> MetaParams:
    return _PARAM_TYPES[canonical_kind(kind)]()


def make_params(kind: str, overrides: dict | None = None) -> MetaParams:
    return _PARAM_TYPES[canonical_kind(kind)](**(overrides or {}))


def fit(kind: str, Z, y, params: MetaParams | None = None) -> MetaModel:
    """Train one meta-classifier kind on meta-features Z and labels y."""
    kind = canonical_kind(kind)
    if params is not None and not isinstance(params, _PARAM_TYPES[kind]):
        raise TypeError(
            f"params for kind {kind} must be {_PARAM_TYPES[kind].__name__}"
        )
    return _FITTERS[kind](Z, y, params)


def predict_proba(model: MetaModel, Z) -> np.ndarray:
    return model.predict_proba(Z)


def predict(model: MetaModel, Z) -> np.ndarray:
    """Class predictions: probability argmax, smallest index on ties."""
    return model.predict_proba(Z).argmax(axis=1)


def model_to_dict(model: MetaModel) -> dict:
    return model.to_dict()


def model_from_dict(document: dict) -> MetaModel:
    kind = canonical_kind(document["kind"])
    return _MODEL_TYPES[kind].from_dict(document)


def save_model(model: MetaModel, path: str | Path) -> None:
    save_model_dict(model.to_dict(), path)


def load_model(path: str | Path) -> MetaModel:
    return model_from_dict(load_model_dict(path))


__all__ = [
    "KIND_LABELS",
    "KIND_ORDER",
    "SCHEMA_VERSION",
    "MetaModel",
    "MetaParams",
    "LRParams",
    "RFParams",
    "SVMParams",
    "GBTParams",
    "LogisticModel",
    "ForestModel",
    "SVMModel",
    "GBTModel",
    "canonical_kind",
    "default_params",
    "make_params",
    "fit",
    "fit_lr",
    "fit_rf",
    "fit_svm",
    "fit_gbt",
    "predict",
    "predict_proba",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]
