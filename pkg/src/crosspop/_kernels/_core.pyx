# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the hot kernels in `_pure`.

Same call signatures and update order; only the summation strategy differs
(scalar loops instead of BLAS), so results match the fallback to rounding.
"""

from libc.math cimport exp, fabs, log, isfinite

import numpy as np

BACKEND = "compiled"

FAMILY_GAUSSIAN = 0
FAMILY_BINOMIAL = 1
FAMILY_MULTINOMIAL = 2


cdef inline double _soft(double z, double lam) nogil:
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef inline double _safelog(double p) nogil:
    if p < 1e-300:
        p = 1e-300
    return log(p)


def cd_enet(double[:, ::1] X, double[::1] y, double[::1] w, double lam,
            double[::1] beta, double b0, int max_iter, double tol):
    """Weighted lasso coordinate descent; beta updated in place.

    Objective: (1/2) sum_i w_i (y_i - b0 - x_i beta)^2 + lam * |beta|_1 with
    the intercept unpenalized.  Returns (b0, sweeps).
    """
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef double[::1] r = np.empty(n, dtype=np.float64)
    cdef double[::1] xv = np.zeros(p, dtype=np.float64)
    cdef Py_ssize_t i, j, sweep
    cdef double acc, sw, num, bj, bj_new, shift, delta_max, d

    sw = 0.0
    for i in range(n):
        sw += w[i]
        acc = y[i] - b0
        for j in range(p):
            acc -= X[i, j] * beta[j]
            xv[j] += w[i] * X[i, j] * X[i, j]
        r[i] = acc

    for sweep in range(1, max_iter + 1):
        delta_max = 0.0
        for j in range(p):
            if xv[j] <= 0.0:
                continue
            bj = beta[j]
            num = 0.0
            for i in range(n):
                num += w[i] * X[i, j] * r[i]
            num += bj * xv[j]
            bj_new = _soft(num, lam) / xv[j]
            if bj_new != bj:
                d = bj_new - bj
                for i in range(n):
                    r[i] -= d * X[i, j]
                beta[j] = bj_new
                if fabs(d) > delta_max:
                    delta_max = fabs(d)
        shift = 0.0
        for i in range(n):
            shift += w[i] * r[i]
        shift /= sw
        if shift != 0.0:
            b0 += shift
            for i in range(n):
                r[i] -= shift
            if fabs(shift) > delta_max:
                delta_max = fabs(shift)
        if delta_max < tol:
            return b0, sweep
    return b0, max_iter


def nnet_train(double[:, ::1] X, double[:, ::1] T, int family,
               double[:, ::1] W1, double[::1] b1,
               double[:, ::1] W2, double[::1] b2,
               double lr, int iters):
    """Full-batch gradient descent; parameters updated in place, returns loss."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t h = W1.shape[1]
    cdef Py_ssize_t C = W2.shape[1]
    cdef double[:, ::1] H = np.empty((n, h), dtype=np.float64)
    cdef double[:, ::1] dO = np.empty((n, C), dtype=np.float64)
    cdef double[:, ::1] dH = np.empty((n, h), dtype=np.float64)
    cdef double[:, ::1] gW1 = np.empty((p, h), dtype=np.float64)
    cdef double[:, ::1] gW2 = np.empty((h, C), dtype=np.float64)
    cdef double[::1] gb1 = np.empty(h, dtype=np.float64)
    cdef double[::1] gb2 = np.empty(C, dtype=np.float64)
    cdef double[::1] orow = np.empty(C, dtype=np.float64)
    cdef Py_ssize_t it, i, j, k, c
    cdef double acc, loss, pv, tv, zmax, esum, diff

    loss = float("nan")
    for it in range(iters):
        loss = 0.0
        for i in range(n):
            for k in range(h):
                acc = b1[k]
                for j in range(p):
                    acc += X[i, j] * W1[j, k]
                H[i, k] = _sigmoid(acc)
            for c in range(C):
                acc = b2[c]
                for k in range(h):
                    acc += H[i, k] * W2[k, c]
                orow[c] = acc
            if family == FAMILY_GAUSSIAN:
                for c in range(C):
                    diff = orow[c] - T[i, c]
                    loss += 0.5 * diff * diff
                    dO[i, c] = diff
            elif family == FAMILY_BINOMIAL:
                for c in range(C):
                    pv = _sigmoid(orow[c])
                    tv = T[i, c]
                    loss -= tv * _safelog(pv) + (1.0 - tv) * _safelog(1.0 - pv)
                    dO[i, c] = pv - tv
            else:
                zmax = orow[0]
                for c in range(1, C):
                    if orow[c] > zmax:
                        zmax = orow[c]
                esum = 0.0
                for c in range(C):
                    orow[c] = exp(orow[c] - zmax)
                    esum += orow[c]
                for c in range(C):
                    pv = orow[c] / esum
                    tv = T[i, c]
                    loss -= tv * _safelog(pv)
                    dO[i, c] = pv - tv
        loss /= n
        if not isfinite(loss):
            return loss
        for i in range(n):
            for c in range(C):
                dO[i, c] /= n

        for k in range(h):
            gb1[k] = 0.0
            for c in range(C):
                gW2[k, c] = 0.0
        for c in range(C):
            gb2[c] = 0.0
        for j in range(p):
            for k in range(h):
                gW1[j, k] = 0.0

        for i in range(n):
            for c in range(C):
                gb2[c] += dO[i, c]
            for k in range(h):
                acc = 0.0
                for c in range(C):
                    acc += dO[i, c] * W2[k, c]
                    gW2[k, c] += H[i, k] * dO[i, c]
                dH[i, k] = acc * H[i, k] * (1.0 - H[i, k])
                gb1[k] += dH[i, k]
            for j in range(p):
                for k in range(h):
                    gW1[j, k] += X[i, j] * dH[i, k]

        for j in range(p):
            for k in range(h):
                W1[j, k] -= lr * gW1[j, k]
        for k in range(h):
            b1[k] -= lr * gb1[k]
            for c in range(C):
                W2[k, c] -= lr * gW2[k, c]
        for c in range(C):
            b2[c] -= lr * gb2[c]
    return loss
