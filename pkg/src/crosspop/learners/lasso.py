"""L1-penalized GLMs: coordinate descent over a cross-validated lambda path.

Slope columns are standardized internally (the intercept is unpenalized) and
coefficients are mapped back, so predictions refer to the original design.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from .._rng import child_rng
from ..errors import ConvergenceError, FitError, ValidationError
from .families import BINOMIAL, GAUSSIAN, canonical_family, check_response, sigmoid

GRID_SIZE = 100
GRID_RATIO = 1e-3
CD_TOL = 1e-11
CD_MAX_SWEEPS = 100_000
IRLS_MAX = 50
KKT_TOL = 1e-6


@dataclass
class LassoFit:
    family: str
    coef: np.ndarray
    lam: float
    lam_grid: np.ndarray
    cv_deviance: np.ndarray | None
    kkt_violation: float
    n_train: int
    learner_id: str = "lasso"

    def predict(self, values: np.ndarray) -> np.ndarray:
        eta = np.asarray(values, dtype=np.float64) @ self.coef
        if self.family == BINOMIAL:
            return sigmoid(eta)
        return eta


def fit_lasso(values, response, family, weights=None, lambda_grid=None,
              cv_folds=10, seed=0) -> LassoFit:
    """Fit along a lambda path and select by minimum cross-validated deviance.

    A single-element `lambda_grid` skips cross-validation.  A constant
    response degenerates to an intercept-only model with a warning.
    """
    family = canonical_family(family)
    X = np.asarray(values, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64)
    n = len(y)
    check_response(family, y)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    w = w / w.mean()

    if X.shape[1] <= 1 or np.all(X[:, 1:].std(axis=0) == 0.0):
        raise FitError("all-constant design for a penalized fit")
    std = _Standardizer(X)
    if np.ptp(y) == 0.0:
        warnings.warn("constant response: returning an intercept-only model")
        coef = np.zeros(X.shape[1])
        coef[0] = _null_intercept(y, w, family)
        return LassoFit(family, coef, 0.0, np.array([0.0]), None, 0.0, n)

    if lambda_grid is None:
        lam_max = _lambda_max(std.xs, y, w, family)
        grid = np.geomspace(lam_max, GRID_RATIO * lam_max, GRID_SIZE)
    else:
        grid = np.sort(np.asarray(lambda_grid, dtype=np.float64))[::-1].copy()

    cv_dev = None
    if len(grid) > 1:
        if n < cv_folds or cv_folds < 2:
            raise ValidationError(f"need n >= cv_folds >= 2, got n={n}, folds={cv_folds}")
        cv_dev = _cv_deviance(std.xs, y, w, grid, family, cv_folds, seed)
        best = int(np.argmin(cv_dev))
    else:
        best = 0

    path = _fit_path(std.xs, y, w, grid[: best + 1], family)
    b0, beta = path[-1]
    coef = std.destandardize(b0, beta)
    kkt = _kkt_violation(std.xs, y, w, b0, beta, grid[best], family)
    if kkt > KKT_TOL:
        raise ConvergenceError(f"KKT violation {kkt:.2e} at selected lambda")
    return LassoFit(family, coef, float(grid[best]), grid, cv_dev, kkt, n)


class _Standardizer:
    def __init__(self, X):
        self.p = X.shape[1]
        slopes = X[:, 1:]
        self.center = slopes.mean(axis=0)
        scale = slopes.std(axis=0)
        scale[scale == 0.0] = 1.0
        self.scale = scale
        self.xs = np.ascontiguousarray((slopes - self.center) / self.scale)

    def destandardize(self, b0, beta):
        coef = np.zeros(self.p)
        coef[1:] = beta / self.scale
        coef[0] = b0 - float(np.dot(self.center / self.scale, beta))
        return coef


def _null_intercept(y, w, family):
    mean = float(np.average(y, weights=w))
    if family == BINOMIAL:
        mean = min(max(mean, 1e-10), 1.0 - 1e-10)
        return float(np.log(mean / (1.0 - mean)))
    return mean


def _lambda_max(xs, y, w, family):
    wn = w / len(y)
    ybar = float(np.average(y, weights=w))
    grad = xs.T @ (wn * (y - ybar))
    lam = float(np.max(np.abs(grad))) if xs.shape[1] else 0.0
    return max(lam, 1e-12)


def _fit_path(xs, y, w, grid, family):
    """Solve the path with warm starts; returns [(b0, beta), ...] per lambda."""
    n, p = xs.shape
    beta = np.zeros(p)
    b0 = _null_intercept(y, w, family)
    out = []
    for lam in grid:
        if family == GAUSSIAN:
            b0, _ = _kernels.cd_enet(xs, y, w / n, float(lam), beta, b0, CD_MAX_SWEEPS, CD_TOL)
        else:
            b0 = _irls_lasso(xs, y, w, float(lam), beta, b0)
        out.append((b0, beta.copy()))
    return out


def _irls_lasso(xs, y, w, lam, beta, b0):
    n = len(y)
    dev = np.inf
    for _ in range(IRLS_MAX):
        eta = b0 + xs @ beta
        mu = sigmoid(eta)
        wq = np.maximum(mu * (1.0 - mu), 1e-6)
        z = eta + (y - mu) / wq
        b0, _ = _kernels.cd_enet(xs, z, w * wq / n, lam, beta, b0, CD_MAX_SWEEPS, CD_TOL)
        new_dev = _deviance_binomial(y, sigmoid(b0 + xs @ beta), w)
        if abs(dev - new_dev) < 1e-9 * (abs(new_dev) + 0.1):
            return b0
        dev = new_dev
    return b0


def _deviance_binomial(y, mu, w):
    mu = np.clip(mu, 1e-12, 1.0 - 1e-12)
    return float(-2.0 * np.sum(w * (y * np.log(mu) + (1.0 - y) * np.log(1.0 - mu))))


def _cv_deviance(xs, y, w, grid, family, cv_folds, seed):
    n = len(y)
    rng = child_rng(seed, "lasso-cv")
    perm = rng.permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % cv_folds
    total = np.zeros(len(grid))
    for f in range(cv_folds):
        test = fold_of == f
        train = ~test
        path = _fit_path(xs[train], y[train], w[train], grid, family)
        for g, (b0, beta) in enumerate(path):
            eta = b0 + xs[test] @ beta
            if family == GAUSSIAN:
                total[g] += float(np.sum(w[test] * (y[test] - eta) ** 2))
            else:
                total[g] += _deviance_binomial(y[test], sigmoid(eta), w[test])
    return total / n


def _kkt_violation(xs, y, w, b0, beta, lam, family):
    """Max violation of the stationarity conditions on the standardized scale."""
    n = len(y)
    eta = b0 + xs @ beta
    mu = sigmoid(eta) if family == BINOMIAL else eta
    grad = xs.T @ ((w / n) * (y - mu))
    active = beta != 0.0
    viol = 0.0
    if np.any(active):
        viol = float(np.max(np.abs(grad[active] - lam * np.sign(beta[active]))))
    if np.any(~active):
        viol = max(viol, float(np.max(np.maximum(np.abs(grad[~active]) - lam, 0.0))))
    viol = max(viol, abs(float(np.dot(w / n, y - mu))) * n / w.sum())
    return viol
