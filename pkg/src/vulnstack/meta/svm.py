"""RBF-kernel support vector machine with calibrated probabilities.

One-vs-rest binary machines train by sequential minimal optimization
on the standard dual

    min 0.5 * a'Qa - e'a   s.t.  0 <= a <= C,   Q_ij = t_i t_j K_ij.

Working pairs are chosen by the maximal-violating-pair rule with a
second-order tiebreak on the candidate partner, the two-variable
subproblem is solved analytically with box clipping, and iteration
stops when the KKT violation gap m(a) - M(a) falls under ``tol``.  The
final gap, dual objective, and iteration count stay on the model.

The kernel width follows the "scale" convention: gamma = 1 / (d * var)
over all matrix entries.

Decision values become probabilities through per-class sigmoid
calibration: sigma(A*f + B) fit by the damped Newton recipe of
Platt scaling on out-of-fold decision values from a stratified 3-fold
pass over the training set, after which the machine refits on the full
set.  Class probabilities are the calibrated scores renormalized to
sum to one, which needs at least 5 samples in every present class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import CalibrationError
from ..rng import derive
from .base import (
    SCHEMA_VERSION,
    check_predict_input,
    check_training_data,
    expand_to_all_classes,
)

_TAU = 1e-12


@dataclass(frozen=True)
class SVMParams:
    C: float = 1.0
    tol: float = 1e-3
    calibration_folds: int = 3
    seed: int = 42
    max_iter: int = 1_000_000

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.calibration_folds < 2:
            raise ValueError("calibration_folds must be >= 2")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        (A * A).sum(axis=1)[:, None]
        + (B * B).sum(axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def scale_gamma(X: np.ndarray) -> float:
    variance = float(X.var())
    if variance <= 0.0:
        return 1.0
    return 1.0 / (X.shape[1] * variance)


@dataclass
class SMOResult:
    alpha: np.ndarray
    rho: float
    kkt_gap: float
    dual_objective: float
    iterations: int
    converged: bool


def smo_solve(
    K: np.ndarray, t: np.ndarray, C: float, tol: float, max_iter: int
) -> SMOResult:
    """Solve the binary dual on a precomputed kernel matrix.

    ``t`` holds +/-1 labels.  Gradient bookkeeping follows the usual
    scheme: G = Qa - e, maintained incrementally from the two updated
    variables each iteration.
    """
    n = len(t)
    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.ascontiguousarray(np.diag(K))
    pos = t > 0

    gap = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        v = -t * G  # the KKT violation score
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (~pos & (alpha < C)) | (pos & (alpha > 0))
        v_up = np.where(up, v, -np.inf)
        i = int(np.argmax(v_up))
        m_up = v_up[i]
        m_low = float(np.min(np.where(low, v, np.inf)))
        gap = float(m_up - m_low)
        if gap <= tol:
            iterations -= 1
            break

        # Second-order partner choice: largest decrease of the dual
        # objective among violating candidates.
        Ki = K[i]
        quad = diag[i] + diag - 2.0 * t[i] * t * Ki
        quad = np.where(quad > 0, quad, _TAU)
        grad_diff = m_up - v
        candidates = low & (v < m_up)
        score = np.where(candidates, (grad_diff * grad_diff) / quad, -np.inf)
        j = int(np.argmax(score))

        Kj = K[j]
        quad_ij = float(diag[i] + diag[j] - 2.0 * t[i] * t[j] * Ki[j])
        if quad_ij <= 0:
            quad_ij = _TAU
        old_i, old_j = alpha[i], alpha[j]
        if t[i] != t[j]:
            delta = (-G[i] - G[j]) / quad_ij
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            else:
                if ai < 0:
                    ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            else:
                if aj > C:
                    aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / quad_ij
            total = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            else:
                if aj < 0:
                    aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            else:
                if ai < 0:
                    ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        G += (t * t[i] * Ki) * (ai - old_i) + (t * t[j] * Kj) * (aj - old_j)

    converged = gap <= tol

    # Offset: average violation score over free vectors, else the
    # midpoint of the bound-side extremes.
    t_grad = t * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(t_grad[free].mean())
    else:
        upper_bound = np.where(
            ((alpha >= C) & ~pos) | ((alpha <= 0) & pos), t_grad, np.inf
        )
        lower_bound = np.where(
            ((alpha >= C) & pos) | ((alpha <= 0) & ~pos), t_grad, -np.inf
        )
        rho = 0.5 * (float(upper_bound.min()) + float(lower_bound.max()))

    # 0.5 a'Qa - e'a, using a'Qa = a'(G + e).
    dual_objective = 0.5 * float(alpha @ G - alpha.sum())
    return SMOResult(
        alpha=alpha,
        rho=rho,
        kkt_gap=gap,
        dual_objective=dual_objective,
        iterations=iterations,
        converged=converged,
    )


def platt_scale(decisions: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Fit sigma(A*f + B) to binary labels by damped Newton iteration."""
    decisions = np.asarray(decisions, dtype=np.float64)
    positive = np.asarray(labels).astype(bool)
    prior1 = int(positive.sum())
    prior0 = len(positive) - prior1

    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    target = np.where(positive, hi, lo)

    A = 0.0
    B = math.log((prior0 + 1.0) / (prior1 + 1.0))

    def objective(a: float, b: float) -> float:
        fApB = decisions * a + b
        return float(
            np.where(
                fApB >= 0,
                target * fApB + np.log1p(np.exp(-np.abs(fApB))),
                (target - 1.0) * fApB + np.log1p(np.exp(-np.abs(fApB))),
            ).sum()
        )

    value = objective(A, B)
    for _ in range(100):
        fApB = decisions * A + B
        exp_neg = np.exp(-np.abs(fApB))
        p = np.where(fApB >= 0, exp_neg / (1.0 + exp_neg), 1.0 / (1.0 + exp_neg))
        q = 1.0 - p
        d2 = p * q
        g1 = float((decisions * (target - p)).sum())
        g2 = float((target - p).sum())
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        h11 = float((decisions * decisions * d2).sum()) + 1e-12
        h22 = float(d2.sum()) + 1e-12
        h21 = float((decisions * d2).sum())
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            new_a, new_b = A + step * dA, B + step * dB
            new_value = objective(new_a, new_b)
            if new_value < value + 1e-4 * step * gd:
                A, B, value = new_a, new_b, new_value
                break
            step *= 0.5
        else:
            break
    return A, B


def _stratified_folds(
    flags: np.ndarray, n_folds: int, rng
) -> np.ndarray:
    """Fold id per row, dealing each binary group round-robin."""
    fold = np.empty(len(flags), dtype=np.int64)
    for value in (True, False):
        group = np.flatnonzero(flags == value).tolist()
        rng.shuffle(group)
        for position, row in enumerate(group):
            fold[row] = position % n_folds
    return fold


@dataclass
class _BinaryMachine:
    coef: np.ndarray  # alpha_i * t_i over support vectors
    vectors: np.ndarray
    rho: float
    platt_a: float
    platt_b: float
    kkt_gap: float
    dual_objective: float
    iterations: int
    converged: bool

    def decision(self, Z: np.ndarray, gamma: float) -> np.ndarray:
        return rbf_kernel(Z, self.vectors, gamma) @ self.coef - self.rho

    def calibrated(self, Z: np.ndarray, gamma: float) -> np.ndarray:
        f = self.decision(Z, gamma)
        fApB = f * self.platt_a + self.platt_b
        exp_neg = np.exp(-np.abs(fApB))
        return np.where(
            fApB >= 0, exp_neg / (1.0 + exp_neg), 1.0 / (1.0 + exp_neg)
        )


@dataclass
class SVMModel:
    kind = "SVM"
    params: SVMParams
    classes: tuple[int, ...]
    gamma: float
    n_features: int
    machines: list[_BinaryMachine]

    def decision_values(self, Z) -> np.ndarray:
        Z = check_predict_input(Z, self.n_features)
        return np.column_stack(
            [machine.decision(Z, self.gamma) for machine in self.machines]
        )

    def predict_proba(self, Z) -> np.ndarray:
        Z = check_predict_input(Z, self.n_features)
        scores = np.column_stack(
            [machine.calibrated(Z, self.gamma) for machine in self.machines]
        )
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
                "tol": self.params.tol,
                "calibration_folds": self.params.calibration_folds,
                "seed": self.params.seed,
                "max_iter": self.params.max_iter,
            },
            "parameters": {
                "classes": list(self.classes),
                "gamma": self.gamma,
                "n_features": self.n_features,
                "machines": [
                    {
                        "coef": machine.coef.tolist(),
                        "vectors": machine.vectors.tolist(),
                        "rho": machine.rho,
                        "platt_a": machine.platt_a,
                        "platt_b": machine.platt_b,
                        "kkt_gap": machine.kkt_gap,
                        "dual_objective": machine.dual_objective,
                        "iterations": machine.iterations,
                        "converged": machine.converged,
                    }
                    for machine in self.machines
                ],
            },
        }

    @classmethod
    def from_dict(cls, document: dict) -> "SVMModel":
        hp = document["hyperparameters"]
        p = document["parameters"]
        machines = [
            _BinaryMachine(
                coef=np.array(m["coef"], dtype=np.float64),
                vectors=np.array(m["vectors"], dtype=np.float64).reshape(
                    len(m["coef"]), p["n_features"]
                ),
                rho=m["rho"],
                platt_a=m["platt_a"],
                platt_b=m["platt_b"],
                kkt_gap=m["kkt_gap"],
                dual_objective=m["dual_objective"],
                iterations=m["iterations"],
                converged=m["converged"],
            )
            for m in p["machines"]
        ]
        return cls(
            params=SVMParams(
                C=hp["C"],
                tol=hp["tol"],
                calibration_folds=hp["calibration_folds"],
                seed=hp["seed"],
                max_iter=hp["max_iter"],
            ),
            classes=tuple(p["classes"]),
            gamma=p["gamma"],
            n_features=p["n_features"],
            machines=machines,
        )


def fit_svm(Z, y, params: SVMParams | None = None) -> SVMModel:
    params = params or SVMParams()
    Z, y, classes = check_training_data(Z, y)
    for cls_label in classes:
        count = int((y == cls_label).sum())
        if count < 5:
            raise CalibrationError(
                f"class {cls_label} has {count} sample(s); probability "
                "calibration needs at least 5 per present class"
            )

    gamma = scale_gamma(Z)
    K = rbf_kernel(Z, Z, gamma)

    machines = []
    for cls_label in classes:
        flags = y == cls_label
        t = np.where(flags, 1.0, -1.0)

        # Out-of-fold decision values feed the calibration fit.
        rng = derive(params.seed, f"platt/{cls_label}")
        fold = _stratified_folds(flags, params.calibration_folds, rng)
        oof = np.zeros(len(t))
        for f in range(params.calibration_folds):
            held = fold == f
            fit_rows = np.flatnonzero(~held)
            held_rows = np.flatnonzero(held)
            if len(held_rows) == 0 or len(fit_rows) == 0:
                continue
            sub = smo_solve(
                K[np.ix_(fit_rows, fit_rows)],
                t[fit_rows],
                params.C,
                params.tol,
                params.max_iter,
            )
            oof[held_rows] = (
                K[np.ix_(held_rows, fit_rows)] @ (sub.alpha * t[fit_rows])
                - sub.rho
            )
        platt_a, platt_b = platt_scale(oof, flags)

        final = smo_solve(K, t, params.C, params.tol, params.max_iter)
        support = np.flatnonzero(final.alpha > 0)
        machines.append(
            _BinaryMachine(
                coef=final.alpha[support] * t[support],
                vectors=Z[support],
                rho=final.rho,
                platt_a=platt_a,
                platt_b=platt_b,
                kkt_gap=final.kkt_gap,
                dual_objective=final.dual_objective,
                iterations=final.iterations,
                converged=final.converged,
            )
        )

    return SVMModel(
        params=params,
        classes=classes,
        gamma=gamma,
        n_features=Z.shape[1],
        machines=machines,
    )
