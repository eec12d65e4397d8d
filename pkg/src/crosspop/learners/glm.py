"""Generalized linear models fit by iteratively reweighted least squares."""

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, FitError, SeparationError
from .families import BINOMIAL, GAUSSIAN, canonical_family, check_response, sigmoid

MAX_ITER = 100
DEVIANCE_TOL = 1e-10
SCORE_TOL = 1e-8
SEPARATION_BOUND = 30.0
RIDGE_FALLBACK = 1e-8


@dataclass
class GLMFit:
    family: str
    coef: np.ndarray
    n_iter: int
    deviance: float
    score_norm: float
    n_train: int
    learner_id: str = "glm"

    def predict(self, values: np.ndarray) -> np.ndarray:
        eta = np.asarray(values, dtype=np.float64) @ self.coef
        if self.family == BINOMIAL:
            return sigmoid(eta)
        return eta


def fit_glm(values, response, family, weights=None, *, ridge_fallback=True) -> GLMFit:
    """Fit a GLM on a design matrix whose first column is the intercept.

    The fit satisfies the score equations to SCORE_TOL (per-observation
    scale).  Rank-deficient designs fall back to a tiny ridge on the slopes
    unless `ridge_fallback` is disabled, in which case they raise.  Perfect
    separation in a binomial fit raises SeparationError.
    """
    family = canonical_family(family)
    X = np.asarray(values, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64)
    n = len(y)
    check_response(family, y)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)

    if family == GAUSSIAN:
        coef, n_iter = _solve_wls(X, y, w, ridge_fallback)
        mu = X @ coef
        dev = float(np.sum(w * (y - mu) ** 2))
    else:
        coef, n_iter, dev = _irls_binomial(X, y, w, ridge_fallback)
        mu = sigmoid(X @ coef)

    score = X.T @ (w * (y - mu)) / n
    score_norm = float(np.max(np.abs(score)))
    if score_norm >= SCORE_TOL:
        raise ConvergenceError(
            f"IRLS did not satisfy the score equations (|score|={score_norm:.2e})"
        )
    return GLMFit(
        family=family,
        coef=coef,
        n_iter=n_iter,
        deviance=dev,
        score_norm=score_norm,
        n_train=n,
    )


def _solve_wls(X, y, w, ridge_fallback):
    """Weighted least squares with one iterative-refinement pass."""
    xtwx = X.T @ (w[:, None] * X)
    xtwy = X.T @ (w * y)
    try:
        chol = np.linalg.cholesky(xtwx)
    except np.linalg.LinAlgError:
        if not ridge_fallback:
            raise FitError("rank-deficient design (ridge fallback disabled)") from None
        xtwx = xtwx + RIDGE_FALLBACK * _slope_eye(X.shape[1])
        chol = np.linalg.cholesky(xtwx)
    coef = _chol_solve(chol, xtwy)
    # one refinement pass keeps the score residual at rounding level
    resid = xtwy - xtwx @ coef
    coef = coef + _chol_solve(chol, resid)
    return coef, 1


def _slope_eye(p):
    eye = np.eye(p)
    eye[0, 0] = 0.0
    return eye


def _chol_solve(chol, b):
    z = np.linalg.solve(chol, b)
    return np.linalg.solve(chol.T, z)


def _irls_binomial(X, y, w, ridge_fallback):
    n, p = X.shape
    coef = np.zeros(p)
    dev = np.inf
    for it in range(1, MAX_ITER + 1):
        eta = X @ coef
        mu = sigmoid(eta)
        wq = np.maximum(mu * (1.0 - mu), 1e-10) * w
        z = eta + (y - mu) / np.maximum(mu * (1.0 - mu), 1e-10)
        coef, _ = _solve_wls(X, z, wq, ridge_fallback)
        if np.max(np.abs(coef)) > SEPARATION_BOUND:
            raise SeparationError("separation")
        new_dev = _binomial_deviance(y, sigmoid(X @ coef), w)
        if np.isfinite(dev) and abs(dev - new_dev) < DEVIANCE_TOL:
            return coef, it, new_dev
        dev = new_dev
    raise ConvergenceError(f"IRLS exceeded {MAX_ITER} iterations")


def _binomial_deviance(y, mu, w):
    mu = np.clip(mu, 1e-12, 1.0 - 1e-12)
    return float(-2.0 * np.sum(w * (y * np.log(mu) + (1.0 - y) * np.log(1.0 - mu))))
