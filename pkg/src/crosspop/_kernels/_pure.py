"""Pure-numpy kernel implementations.

Selected at import time when the compiled extension is unavailable (or forced
via CROSSPOP_KERNEL=python).  Arithmetic mirrors `_core.pyx`; results agree to
floating-point rounding, not bit-for-bit, because summation orders differ.
"""

import numpy as np

BACKEND = "python"

FAMILY_GAUSSIAN = 0
FAMILY_BINOMIAL = 1
FAMILY_MULTINOMIAL = 2


def cd_enet(X, y, w, lam, beta, b0, max_iter, tol):
    """Coordinate descent for (1/2) sum_i w_i (y_i - b0 - x_i beta)^2 + lam*|beta|_1.

    `beta` is updated in place; the intercept is unpenalized.  Returns
    (b0, sweeps).  Weights need not be normalized.
    """
    X = np.asarray(X)
    n, p = X.shape
    sw = float(w.sum())
    xv = (w[:, None] * X * X).sum(axis=0)
    r = y - b0 - X @ beta
    for sweep in range(1, max_iter + 1):
        delta_max = 0.0
        for j in range(p):
            if xv[j] <= 0.0:
                continue
            bj = beta[j]
            num = float(np.dot(w * X[:, j], r)) + bj * xv[j]
            bj_new = _soft(num, lam) / xv[j]
            if bj_new != bj:
                r -= (bj_new - bj) * X[:, j]
                beta[j] = bj_new
                delta_max = max(delta_max, abs(bj_new - bj))
        shift = float(np.dot(w, r)) / sw
        if shift != 0.0:
            b0 += shift
            r -= shift
            delta_max = max(delta_max, abs(shift))
        if delta_max < tol:
            return b0, sweep
    return b0, max_iter


def _soft(z, lam):
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def nnet_train(X, T, family, W1, b1, W2, b2, lr, iters):
    """Full-batch gradient descent for a single-hidden-layer network.

    Hidden activations are logistic; the output map and mean loss follow
    `family` (0 gaussian / 1 binomial / 2 multinomial).  Parameters are
    updated in place; returns the final loss (nan propagates to the caller).
    """
    n = X.shape[0]
    loss = np.nan
    for _ in range(iters):
        H = _sigmoid(X @ W1 + b1)
        O = H @ W2 + b2
        if family == FAMILY_GAUSSIAN:
            P = O
            loss = 0.5 * np.mean(np.sum((P - T) ** 2, axis=1))
        elif family == FAMILY_BINOMIAL:
            P = _sigmoid(O)
            loss = -np.mean(T * _log(P) + (1.0 - T) * _log(1.0 - P))
        else:
            Z = O - O.max(axis=1, keepdims=True)
            E = np.exp(Z)
            P = E / E.sum(axis=1, keepdims=True)
            loss = -np.mean(np.sum(T * _log(P), axis=1))
        if not np.isfinite(loss):
            return float(loss)
        dO = (P - T) / n
        gW2 = H.T @ dO
        gb2 = dO.sum(axis=0)
        dH = (dO @ W2.T) * H * (1.0 - H)
        gW1 = X.T @ dH
        gb1 = dH.sum(axis=0)
        W1 -= lr * gW1
        b1 -= lr * gb1
        W2 -= lr * gW2
        b2 -= lr * gb2
    return float(loss)


def nnet_forward(X, family, W1, b1, W2, b2):
    H = _sigmoid(X @ W1 + b1)
    O = H @ W2 + b2
    if family == FAMILY_GAUSSIAN:
        return O
    if family == FAMILY_BINOMIAL:
        return _sigmoid(O)
    Z = O - O.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log(p):
    return np.log(np.clip(p, 1e-300, None))
