"""One-vs-rest logistic regression: solver quality and serialization."""

import numpy as np
import pytest
from scipy import optimize

from vulnstack.errors import DegenerateDataError
from vulnstack.meta import LogisticModel, LRParams, fit_lr


def blobs(rng, n_per_class=40, classes=(0, 1, 2, 3, 4), d=10, spread=0.4):
    Z, y = [], []
    for c in classes:
        center = np.zeros(d)
        center[c % d] = 3.0
        center[(2 * c + 1) % d] = -2.0
        Z.append(center + spread * rng.standard_normal((n_per_class, d)))
        y.extend([c] * n_per_class)
    return np.vstack(Z), np.array(y)


class TestParams:
    @pytest.mark.parametrize(
        "kwargs", [{"C": 0.0}, {"C": -1.0}, {"max_iter": 0}, {"tol": 0.0}]
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            LRParams(**kwargs)

    def test_defaults(self):
        params = LRParams()
        assert (params.C, params.max_iter, params.tol) == (1.0, 200, 1e-4)


class TestFit:
    def test_separable_data_fits_perfectly(self, rng):
        Z, y = blobs(rng)
        model = fit_lr(Z, y)
        assert (model.predict(Z) == y).mean() == 1.0

    def test_probability_rows_sum_to_one(self, rng):
        Z, y = blobs(rng)
        probs = fit_lr(Z, y).predict_proba(Z)
        assert probs.shape == (len(Z), 5)
        assert np.all(probs >= 0)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_converged_or_capped_recorded_per_class(self, rng):
        Z, y = blobs(rng)
        params = LRParams()
        model = fit_lr(Z, y, params)
        assert len(model.grad_norms) == len(model.classes)
        for grad_norm, n_iter, hit_cap in zip(
            model.grad_norms, model.iterations, model.capped
        ):
            if hit_cap:
                assert n_iter == params.max_iter
            else:
                assert grad_norm < params.tol

    def test_tiny_iteration_budget_reports_cap(self, rng):
        Z, y = blobs(rng, spread=1.5)
        model = fit_lr(Z, y, LRParams(max_iter=1, tol=1e-12))
        assert any(model.capped)

    def test_absent_classes_get_zero_probability(self, rng):
        Z, y = blobs(rng, classes=(0, 3))
        model = fit_lr(Z, y)
        probs = model.predict_proba(Z)
        assert np.all(probs[:, [1, 2, 4]] == 0.0)
        assert set(np.unique(model.predict(Z))) <= {0, 3}

    def test_single_class_rejected(self, rng):
        Z = rng.standard_normal((10, 3))
        with pytest.raises(DegenerateDataError):
            fit_lr(Z, np.zeros(10, dtype=int))

    def test_objective_matches_scipy_optimum(self, rng):
        # Binary subproblem oracle: same L2-penalized logistic objective
        # minimized by BFGS must agree with the Newton solution.
        Z, y = blobs(rng, n_per_class=30, classes=(0, 1), d=4)
        params = LRParams(tol=1e-8, max_iter=500)
        model = fit_lr(Z, y, params)

        A = np.hstack([Z, np.ones((len(Z), 1))])
        t = np.where(y == 0, 1.0, -1.0)

        def objective(w):
            margins = t * (A @ w)
            return 0.5 * w[:-1] @ w[:-1] + params.C * np.logaddexp(0, -margins).sum()

        def gradient(w):
            margins = t * (A @ w)
            sig = 1.0 / (1.0 + np.exp(np.clip(margins, -500, 500)))
            grad = np.append(w[:-1], 0.0)
            return grad + params.C * (A.T @ (-t * sig))

        result = optimize.minimize(
            objective, np.zeros(A.shape[1]), jac=gradient, method="BFGS",
            options={"gtol": 1e-10, "maxiter": 1000},
        )
        ours = objective(np.append(model.weights[0], model.bias[0]))
        assert ours == pytest.approx(result.fun, abs=1e-6)

    def test_deterministic(self, rng):
        Z, y = blobs(rng)
        a = fit_lr(Z, y)
        b = fit_lr(Z, y)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)

    def test_predict_validates_width(self, rng):
        Z, y = blobs(rng, d=6)
        model = fit_lr(Z, y)
        with pytest.raises(ValueError, match="expected shape"):
            model.predict_proba(np.zeros((3, 7)))
        with pytest.raises(ValueError, match="finite"):
            model.predict_proba(np.full((2, 6), np.nan))


class TestSerialization:
    def test_round_trip_bit_exact(self, rng):
        Z, y = blobs(rng, classes=(0, 2, 4))
        model = fit_lr(Z, y)
        clone = LogisticModel.from_dict(model.to_dict())
        assert clone.classes == model.classes
        assert np.array_equal(clone.predict_proba(Z), model.predict_proba(Z))
        assert clone.capped == model.capped

    def test_document_shape(self, rng):
        Z, y = blobs(rng)
        document = fit_lr(Z, y).to_dict()
        assert document["kind"] == "LR"
        assert document["schema_version"] == 1
        assert document["hyperparameters"] == {"C": 1.0, "max_iter": 200, "tol": 1e-4}
