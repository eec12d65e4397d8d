import numpy as np
import pytest

from crosspop.learners import fit_glm, fit_lasso


def hadamard8():
    h2 = np.array([[1.0, 1.0], [1.0, -1.0]])
    h = np.kron(np.kron(h2, h2), h2)
    return h  # 8x8, columns orthogonal, +-1 entries


def orthonormal_design():
    # columns 1..3 of H8: mean 0, population sd 1, mutually orthogonal, so
    # internal standardization is a no-op and X'X/n = I on the slopes
    h = hadamard8()
    return np.column_stack([np.ones(8), h[:, 1], h[:, 2], h[:, 3]])


def test_lambda_zero_equals_glm():
    rng = np.random.default_rng(11)
    X = np.column_stack([np.ones(60), rng.normal(size=(60, 3))])
    y = 1.0 + X[:, 1] - 0.5 * X[:, 2] + rng.normal(size=60) * 0.3
    lasso = fit_lasso(X, y, "gaussian", lambda_grid=[0.0])
    glm = fit_glm(X, y, "gaussian")
    assert np.max(np.abs(lasso.coef - glm.coef)) < 1e-6


def test_orthonormal_soft_threshold():
    X = orthonormal_design()
    rng = np.random.default_rng(3)
    y = 0.5 + 1.2 * X[:, 1] - 0.4 * X[:, 2] + 0.05 * X[:, 3] + rng.normal(size=8) * 0.1
    ols = np.linalg.lstsq(X, y, rcond=None)[0]
    lam = 0.3
    fit = fit_lasso(X, y, "gaussian", lambda_grid=[lam])
    expected = np.sign(ols[1:]) * np.maximum(np.abs(ols[1:]) - lam, 0.0)
    assert np.max(np.abs(fit.coef[1:] - expected)) < 1e-6
    assert abs(fit.coef[0] - ols[0]) < 1e-6


def test_lambda_at_max_gives_zero_slopes():
    rng = np.random.default_rng(5)
    X = np.column_stack([np.ones(40), rng.normal(size=(40, 4))])
    y = rng.normal(size=40) + 2.0
    xs = (X[:, 1:] - X[:, 1:].mean(axis=0)) / X[:, 1:].std(axis=0)
    lam_max = np.max(np.abs(xs.T @ (y - y.mean()))) / len(y)
    fit = fit_lasso(X, y, "gaussian", lambda_grid=[lam_max * 1.000001])
    assert np.all(fit.coef[1:] == 0.0)
    assert abs(fit.coef[0] - y.mean()) < 1e-10


def test_constant_response_warns_intercept_only():
    X = np.column_stack([np.ones(20), np.arange(20.0)])
    with pytest.warns(UserWarning, match="constant response"):
        fit = fit_lasso(X, np.full(20, 3.5), "gaussian")
    assert fit.coef[1] == 0.0
    assert abs(fit.coef[0] - 3.5) < 1e-12


def test_cv_selects_reasonable_lambda_and_recovers_signal():
    rng = np.random.default_rng(21)
    n, p = 200, 8
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p))])
    beta = np.zeros(p + 1)
    beta[0], beta[1], beta[2] = 1.0, 2.0, -1.5
    y = X @ beta + rng.normal(size=n) * 0.5
    fit = fit_lasso(X, y, "gaussian", cv_folds=5, seed=9)
    assert abs(fit.coef[1] - 2.0) < 0.2
    assert abs(fit.coef[2] + 1.5) < 0.2
    assert np.max(np.abs(fit.coef[3:])) < 0.2
    assert fit.kkt_violation < 1e-6


def test_binomial_lasso_lambda_zero_matches_glm():
    rng = np.random.default_rng(17)
    n = 300
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    p = 1.0 / (1.0 + np.exp(-(0.2 + 0.8 * X[:, 1] - 0.5 * X[:, 2])))
    y = (rng.uniform(size=n) < p).astype(float)
    lasso = fit_lasso(X, y, "binomial", lambda_grid=[0.0])
    glm = fit_glm(X, y, "binomial")
    assert np.max(np.abs(lasso.coef - glm.coef)) < 1e-4


def test_all_constant_design_rejected():
    from crosspop.errors import FitError

    X = np.column_stack([np.ones(12), np.full(12, 2.0)])
    y = np.arange(12.0)
    with pytest.raises(FitError, match="all-constant design"):
        fit_lasso(X, y, "gaussian", lambda_grid=[0.1])


def test_kkt_holds_on_cv_path():
    rng = np.random.default_rng(31)
    n = 120
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 5))])
    y = 0.5 + X[:, 1] + rng.normal(size=n)
    fit = fit_lasso(X, y, "gaussian", cv_folds=4, seed=2)
    assert fit.kkt_violation < 1e-6
