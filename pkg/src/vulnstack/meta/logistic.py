"""One-vs-rest L2-regularized logistic regression.

Each present class gets a binary problem minimizing

    0.5 * w.w + C * sum_i log(1 + exp(-t_i * (w.x_i + b)))

with the intercept left out of the penalty.  A damped Newton iteration
runs until the objective gradient norm drops below ``tol`` or the
iteration cap is hit; both the final gradient norm and whether the cap
fired are recorded on the model.  Class probabilities are the
per-class sigmoids renormalized to sum to one.
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


@dataclass(frozen=True)
class LRParams:
    C: float = 1.0
    max_iter: int = 200
    tol: float = 1e-4

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


def _binary_objective(w: np.ndarray, A: np.ndarray, t: np.ndarray, C: float) -> float:
    margins = t * (A @ w)
    return 0.5 * float(w[:-1] @ w[:-1]) + C * float(
        np.logaddexp(0.0, -margins).sum()
    )


def _fit_binary(
    Z: np.ndarray, t: np.ndarray, params: LRParams
) -> tuple[np.ndarray, float, float, int, bool]:
    n, d = Z.shape
    A = np.hstack([Z, np.ones((n, 1))])  # last column carries the intercept
    w = np.zeros(d + 1)
    penalty_mask = np.ones(d + 1)
    penalty_mask[-1] = 0.0

    iterations = 0
    grad_norm = np.inf
    for iterations in range(1, params.max_iter + 1):
        margins = t * (A @ w)
        sig = 1.0 / (1.0 + np.exp(np.clip(margins, -500, 500)))  # sigma(-margin)
        grad = penalty_mask * w + params.C * (A.T @ (-t * sig))
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < params.tol:
            return w, grad_norm, _binary_objective(w, A, t, params.C), iterations - 1, False

        curvature = sig * (1.0 - sig)
        hessian = params.C * (A.T @ (A * curvature[:, None]))
        hessian += np.diag(penalty_mask)
        hessian[np.diag_indices_from(hessian)] += 1e-10
        direction = np.linalg.solve(hessian, -grad)

        # Backtracking keeps Newton honest far from the optimum.
        value = _binary_objective(w, A, t, params.C)
        slope = float(grad @ direction)
        step = 1.0
        for _ in range(60):
            trial = w + step * direction
            if _binary_objective(trial, A, t, params.C) <= value + 1e-4 * step * slope:
                w = trial
                break
            step *= 0.5
        else:
            break  # no descent step found; gradient is numerically flat

    margins = t * (A @ w)
    sig = 1.0 / (1.0 + np.exp(np.clip(margins, -500, 500)))
    grad = penalty_mask * w + params.C * (A.T @ (-t * sig))
    grad_norm = float(np.linalg.norm(grad))
    capped = grad_norm >= params.tol
    return w, grad_norm, _binary_objective(w, A, t, params.C), iterations, capped


@dataclass
class LogisticModel:
    kind = "LR"
    params: LRParams
    classes: tuple[int, ...]
    weights: np.ndarray  # (k, d)
    bias: np.ndarray  # (k,)
    grad_norms: tuple[float, ...]
    iterations: tuple[int, ...]
    capped: tuple[bool, ...]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def predict_proba(self, Z) -> np.ndarray:
        Z = check_predict_input(Z, self.n_features)
        margins = Z @ self.weights.T + self.bias
        scores = 1.0 / (1.0 + np.exp(-np.clip(margins, -500, 500)))
        scores /= scores.sum(axis=1, keepdims=True)
        return expand_to_all_classes(scores, self.classes)

    def predict(self, Z) -> np.ndarray:
        return self.predict_proba(Z).argmax(axis=1)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "hyperparameters": {
                "C": self.params.C,
                "max_iter": self.params.max_iter,
                "tol": self.params.tol,
            },
            "parameters": {
                "classes": list(self.classes),
                "weights": self.weights.tolist(),
                "bias": self.bias.tolist(),
                "grad_norms": list(self.grad_norms),
                "iterations": list(self.iterations),
                "capped": list(self.capped),
            },
        }

    @classmethod
    def from_dict(cls, document: dict) -> "LogisticModel":
        hp = document["hyperparameters"]
        p = document["parameters"]
        return cls(
            params=LRParams(C=hp["C"], max_iter=hp["max_iter"], tol=hp["tol"]),
            classes=tuple(p["classes"]),
            weights=np.array(p["weights"], dtype=np.float64),
            bias=np.array(p["bias"], dtype=np.float64),
            grad_norms=tuple(p["grad_norms"]),
            iterations=tuple(p["iterations"]),
            capped=tuple(bool(v) for v in p["capped"]),
        )


def fit_lr(Z, y, params: LRParams | None = None) -> LogisticModel:
    params = params or LRParams()
    Z, y, classes = check_training_data(Z, y)
    d = Z.shape[1]

    weights = np.zeros((len(classes), d))
    bias = np.zeros(len(classes))
    grad_norms, iterations, capped = [], [], []
    for row, cls_label in enumerate(classes):
        targets = np.where(y == cls_label, 1.0, -1.0)
        w, grad_norm, _, n_iter, hit_cap = _fit_binary(Z, targets, params)
        weights[row] = w[:-1]
        bias[row] = w[-1]
        grad_norms.append(grad_norm)
        iterations.append(n_iter)
        capped.append(hit_cap)

    return LogisticModel(
        params=params,
        classes=classes,
        weights=weights,
        bias=bias,
        grad_norms=tuple(grad_norms),
        iterations=tuple(iterations),
        capped=tuple(capped),
    )
