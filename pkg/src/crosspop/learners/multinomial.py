"""Multinomial logistic regression by damped Newton, optional ridge penalty.

Coefficients for the reference class (first in sorted order) are fixed at
zero.  The ridge penalty applies to slopes only, which keeps the intercepts
free to match class frequencies.
"""

from dataclasses import dataclass

import numpy as np

from .._rng import child_rng
from ..errors import ConvergenceError, FitError, NumericalError, SeparationError
from .families import MULTINOMIAL

MAX_ITER = 200
OBJ_TOL = 1e-12
GRAD_TOL = 1e-9
SEPARATION_BOUND = 30.0


@dataclass
class MultinomialFit:
    classes: tuple
    coef: np.ndarray  # (p, n_classes); column 0 is the reference, all zeros
    penalty: float
    n_iter: int
    n_train: int
    family: str = MULTINOMIAL
    learner_id: str = "multinomial"

    def predict(self, values: np.ndarray) -> np.ndarray:
        """Class probabilities, columns ordered like `classes`; rows sum to 1."""
        return _softmax(np.asarray(values, dtype=np.float64) @ self.coef)


def fit_multinomial(values, labels, penalty=0.0, classes=None) -> MultinomialFit:
    """Fit P(class | x) with all classes present in `labels` (or in `classes`).

    `classes` pins the expected label set; any expected class missing from the
    training labels is an error rather than a silently dropped category.
    """
    X = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels)
    present = sorted(set(labels.tolist()))
    if classes is None:
        classes = tuple(present)
    else:
        classes = tuple(classes)
        missing = sorted(set(classes) - set(present))
        if missing:
            raise FitError(f"classes absent from training labels: {missing}")
    if len(classes) < 2:
        raise FitError("multinomial fit needs at least 2 classes")

    n, p = X.shape
    C = len(classes)
    idx = {c: k for k, c in enumerate(classes)}
    Y = np.zeros((n, C))
    Y[np.arange(n), [idx[v] for v in labels.tolist()]] = 1.0

    B = np.zeros((p, C))
    pen_mask = np.ones(p)
    pen_mask[0] = 0.0  # intercept unpenalized

    obj = _objective(X, Y, B, penalty, pen_mask)
    n_iter = 0
    for n_iter in range(1, MAX_ITER + 1):
        P = _softmax(X @ B)
        grad = _gradient(X, Y, P, B, penalty, pen_mask)
        if float(np.max(np.abs(grad))) < GRAD_TOL:
            break
        step = _newton_step(X, P, grad, penalty, pen_mask, n)
        new_obj, B = _line_search(X, Y, B, step, obj, penalty, pen_mask)
        if not np.isfinite(new_obj):
            raise NumericalError("non-finite objective in multinomial fit")
        if penalty == 0.0 and float(np.max(np.abs(B))) > SEPARATION_BOUND:
            raise SeparationError("separation")
        if abs(obj - new_obj) < OBJ_TOL * (abs(obj) + 1e-3):
            obj = new_obj
            break
        obj = new_obj
    else:
        raise ConvergenceError(f"multinomial Newton exceeded {MAX_ITER} iterations")
    return MultinomialFit(classes=classes, coef=B, penalty=float(penalty),
                          n_iter=n_iter, n_train=n)


def fit_multinomial_cv(values, labels, penalty_grid=(0.0, 1e-4, 1e-2, 1.0),
                       cv_folds=5, seed=0, classes=None) -> MultinomialFit:
    """Select the ridge penalty by cross-validated multinomial deviance."""
    X = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels)
    n = len(labels)
    if classes is None:
        classes = tuple(sorted(set(labels.tolist())))
    fold_of = _stratified_folds(labels, cv_folds, seed)
    risks = np.zeros(len(penalty_grid))
    for f in range(cv_folds):
        test = fold_of == f
        train = ~test
        for g, pen in enumerate(penalty_grid):
            fit = fit_multinomial(X[train], labels[train], penalty=pen, classes=classes)
            P = fit.predict(X[test])
            hit = np.array([fit.classes.index(v) for v in labels[test].tolist()])
            risks[g] -= float(np.sum(np.log(np.clip(P[np.arange(test.sum()), hit], 1e-12, None))))
    best = float(penalty_grid[int(np.argmin(risks / n))])
    return fit_multinomial(X, labels, penalty=best, classes=classes)


def _stratified_folds(labels, cv_folds, seed):
    n = len(labels)
    fold_of = np.empty(n, dtype=np.int64)
    rng = child_rng(seed, "multinomial-cv")
    for c in sorted(set(labels.tolist())):
        rows = np.flatnonzero(labels == c)
        rows = rows[rng.permutation(len(rows))]
        fold_of[rows] = np.arange(len(rows)) % cv_folds
    return fold_of


def _softmax(eta):
    z = eta - eta.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _objective(X, Y, B, penalty, pen_mask):
    eta = X @ B
    z = eta - eta.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    nll = -float(np.sum(Y * logp)) / len(Y)
    return nll + 0.5 * penalty * float(np.sum((pen_mask[:, None] * B[:, 1:] ** 2)))


def _gradient(X, Y, P, B, penalty, pen_mask):
    g = X.T @ (P[:, 1:] - Y[:, 1:]) / len(Y)
    return g + penalty * pen_mask[:, None] * B[:, 1:]


def _newton_step(X, P, grad, penalty, pen_mask, n):
    p = X.shape[1]
    C1 = P.shape[1] - 1
    H = np.zeros((p * C1, p * C1))
    for c in range(C1):
        for d in range(c, C1):
            pc, pd = P[:, c + 1], P[:, d + 1]
            wt = pc * ((1.0 if c == d else 0.0) - pd)
            block = X.T @ (wt[:, None] * X) / n
            H[c * p:(c + 1) * p, d * p:(d + 1) * p] = block
            if d != c:
                H[d * p:(d + 1) * p, c * p:(c + 1) * p] = block
    H[np.arange(p * C1), np.arange(p * C1)] += penalty * np.tile(pen_mask, C1) + 1e-10
    step = np.linalg.solve(H, grad.T.ravel())
    return step.reshape(C1, p).T


def _line_search(X, Y, B, step, obj, penalty, pen_mask):
    scale = 1.0
    for _ in range(30):
        cand = B.copy()
        cand[:, 1:] = B[:, 1:] - scale * step
        new_obj = _objective(X, Y, cand, penalty, pen_mask)
        if np.isfinite(new_obj) and new_obj <= obj + 1e-14:
            return new_obj, cand
        scale *= 0.5
    return new_obj, cand
