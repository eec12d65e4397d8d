import numpy as np
import pytest

from crosspop.errors import ValidationError
from crosspop.learners import CandidateSpec, LearnerSpec, fit_super_learner


def linear_data(seed, n):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    y = 1.0 + 2.0 * X[:, 1] - X[:, 2] + rng.normal(size=n)
    return X, y


def test_single_candidate_gets_weight_one():
    X, y = linear_data(0, 100)
    spec = LearnerSpec.single("glm")
    fit = fit_super_learner(spec, X, y, "gaussian", seed=4)
    assert fit.weights.tolist() == [1.0]
    assert fit.candidate_labels == ("glm",)


def test_truth_beats_noise_candidate():
    X, y = linear_data(1, 5000)
    # a one-step network is an essentially arbitrary function of x: pure noise
    spec = LearnerSpec(
        candidates=(
            CandidateSpec("glm"),
            CandidateSpec("nnet", {"hidden_units": 3, "iters": 1, "lr": 1e-6}),
        ),
        cv_folds=5,
    )
    fit = fit_super_learner(spec, X, y, "gaussian", seed=7)
    assert fit.weights[0] >= 0.9


def test_weights_on_simplex():
    X, y = linear_data(2, 400)
    spec = LearnerSpec(
        candidates=(
            CandidateSpec("glm"),
            CandidateSpec("lasso", {"cv_folds": 4}),
            CandidateSpec("nnet", {"hidden_units": 2, "iters": 200}),
        ),
        cv_folds=4,
    )
    fit = fit_super_learner(spec, X, y, "gaussian", seed=3)
    assert fit.weights.min() >= 0.0
    assert abs(fit.weights.sum() - 1.0) < 1e-10


def test_stack_risk_beats_every_candidate():
    X, y = linear_data(3, 300)
    spec = LearnerSpec(
        candidates=(
            CandidateSpec("glm"),
            CandidateSpec("nnet", {"hidden_units": 2, "iters": 300}),
        ),
        cv_folds=5,
    )
    fit = fit_super_learner(spec, X, y, "gaussian", seed=12)
    assert fit.stack_risk <= fit.cv_risks.min() + 1e-10


def test_discrete_select_picks_risk_minimizer():
    X, y = linear_data(4, 400)
    spec = LearnerSpec(
        candidates=(
            CandidateSpec("glm"),
            CandidateSpec("nnet", {"hidden_units": 2, "iters": 1, "lr": 1e-6}),
        ),
        policy="discrete-select",
        cv_folds=4,
    )
    fit = fit_super_learner(spec, X, y, "gaussian", seed=5)
    assert fit.weights.tolist() == [1.0, 0.0]
    assert fit.stack_risk == fit.cv_risks.min()


def test_binomial_stack():
    rng = np.random.default_rng(6)
    n = 600
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    p = 1.0 / (1.0 + np.exp(-(0.5 * X[:, 1] - 0.3 * X[:, 2])))
    y = (rng.uniform(size=n) < p).astype(float)
    spec = LearnerSpec(
        candidates=(CandidateSpec("glm"), CandidateSpec("nnet", {"hidden_units": 2, "iters": 300})),
        cv_folds=4,
    )
    fit = fit_super_learner(spec, X, y, "binomial", seed=8)
    pred = fit.predict(X)
    assert np.all(pred >= 0.0) and np.all(pred <= 1.0)
    assert fit.stack_risk <= fit.cv_risks.min() + 1e-10


def test_empty_candidates_rejected():
    with pytest.raises(ValidationError, match="non-empty"):
        LearnerSpec(candidates=())


def test_multinomial_family_rejected():
    X = np.ones((10, 1))
    with pytest.raises(ValidationError, match="gaussian and binomial"):
        fit_super_learner(LearnerSpec.single("glm"), X, np.zeros(10), "multinomial")


def test_determinism():
    X, y = linear_data(9, 200)
    spec = LearnerSpec(
        candidates=(CandidateSpec("glm"), CandidateSpec("nnet", {"hidden_units": 2, "iters": 100})),
        cv_folds=4,
    )
    f1 = fit_super_learner(spec, X, y, "gaussian", seed=10)
    f2 = fit_super_learner(spec, X, y, "gaussian", seed=10)
    assert np.array_equal(f1.weights, f2.weights)
    assert np.array_equal(f1.predict(X), f2.predict(X))
