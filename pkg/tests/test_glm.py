import numpy as np
import pytest

from crosspop.errors import FitError, SeparationError
from crosspop.learners import fit_glm

# Independently computed by Newton iteration on the exact log-likelihood
# (gradient at the fixed point < 1e-15).
SIX_POINT_X = np.array([-2.0, -1.0, 0.0, 1.0, 2.0, 3.0])
SIX_POINT_Y = np.array([0.0, 0.0, 1.0, 0.0, 1.0, 1.0])
SIX_POINT_COEF = (-0.6070137929257102, 1.2140275858514205)


def design(x):
    x = np.asarray(x, dtype=np.float64)
    return np.column_stack([np.ones(len(x)), x])


def test_intercept_only_binomial_half_ones():
    X = np.ones((8, 1))
    y = np.array([0, 1] * 4, dtype=np.float64)
    fit = fit_glm(X, y, "binomial")
    assert abs(fit.coef[0]) < 1e-10


def test_gaussian_exact_linear():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    y = 2.0 + 3.0 * x
    fit = fit_glm(design(x), y, "gaussian")
    assert np.allclose(fit.coef, [2.0, 3.0], atol=1e-10)


def test_binomial_six_point_oracle():
    fit = fit_glm(design(SIX_POINT_X), SIX_POINT_Y, "binomial")
    assert np.allclose(fit.coef, SIX_POINT_COEF, atol=1e-6)
    assert fit.score_norm < 1e-8


def test_gaussian_matches_closed_form():
    rng = np.random.default_rng(7)
    X = np.column_stack([np.ones(50), rng.normal(size=(50, 3))])
    y = rng.normal(size=50)
    fit = fit_glm(X, y, "gaussian")
    closed, *_ = np.linalg.lstsq(X, y, rcond=None)
    assert np.max(np.abs(fit.coef - closed)) < 1e-8


def test_weighted_gaussian_matches_replication():
    # integer weights equal row replication
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([1.0, 3.0, 2.0])
    w = np.array([1.0, 2.0, 3.0])
    fit_w = fit_glm(design(x), y, "gaussian", weights=w)
    xr = np.repeat(x, [1, 2, 3])
    yr = np.repeat(y, [1, 2, 3])
    fit_r = fit_glm(design(xr), yr, "gaussian")
    assert np.allclose(fit_w.coef, fit_r.coef, atol=1e-10)


def test_separation_detected():
    x = np.array([-0.2, -0.1, 0.1, 0.2])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    with pytest.raises(SeparationError, match="separation"):
        fit_glm(design(x), y, "binomial")


def test_rank_deficiency_without_fallback_errors():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    X = np.column_stack([np.ones(4), x, 2 * x])
    with pytest.raises(FitError, match="rank-deficient"):
        fit_glm(X, x, "gaussian", ridge_fallback=False)


def test_rank_deficiency_ridge_fallback_predicts():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    X = np.column_stack([np.ones(4), x, 2 * x])
    y = 1.0 + x
    fit = fit_glm(X, y, "gaussian")
    assert np.allclose(fit.predict(X), y, atol=1e-5)


def test_binomial_range_checked():
    with pytest.raises(Exception, match="0/1"):
        fit_glm(design([0.0, 1.0]), np.array([0.0, 2.0]), "binomial")


def test_probability_predictions_in_unit_interval():
    fit = fit_glm(design(SIX_POINT_X), SIX_POINT_Y, "binomial")
    p = fit.predict(design(np.linspace(-50, 50, 101)))
    assert np.all(p >= 0.0) and np.all(p <= 1.0)
