"""Compiled RK4 for frozen-control affine and projected-sphere fields.

``mode == 0``: ``x' = M x + a``.
``mode == 1``: ``s' = M s - (s^T M s) s`` followed by renormalization.

Each row is integrated independently with plain loops, so results do not
depend on how rows are batched and ``f(-s) = -f(s)`` holds bit for bit.
"""

import numpy as np
from numba import njit


@njit(inline="always", cache=True)
def _rhs(M, a, mode, x, out):
    d = x.shape[0]
    for i in range(d):
        acc = a[i]
        for j in range(d):
            acc += M[i, j] * x[j]
        out[i] = acc
    if mode == 1:
        q = 0.0
        for i in range(d):
            q += x[i] * out[i]
        for i in range(d):
            out[i] -= q * x[i]

@njit(cache=True, nogil=True)
def rk4_rows(M, a, mode, X, h, n_steps):
    """Advance every row of ``X`` by ``n_steps`` steps of size ``h``.

    Returns ``(Y, escaped)`` where ``escaped[r]`` is the number of completed
    steps before row ``r`` became non-finite (or overflowed), else -1.
    """
    N, d = X.shape
    Y = np.empty_like(X)
    escaped = np.full(N, -1, dtype=np.int64)
    x = np.empty(d)
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    tmp = np.empty(d)
    h2 = 0.5 * h
    h6 = h / 6.0
    for r in range(N):
        for i in range(d):
            x[i] = X[r, i]
        for k in range(n_steps):
            _rhs(M, a, mode, x, k1)
            for i in range(d):
                tmp[i] = x[i] + h2 * k1[i]
            _rhs(M, a, mode, tmp, k2)
            for i in range(d):
                tmp[i] = x[i] + h2 * k2[i]
            _rhs(M, a, mode, tmp, k3)
            for i in range(d):
                tmp[i] = x[i] + h * k3[i]
            _rhs(M, a, mode, tmp, k4)
            acc = 0.0
            for i in range(d):
                tmp[i] = x[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                acc += tmp[i] * tmp[i]
            if mode == 1:
                nrm = np.sqrt(acc)
                for i in range(d):
                    tmp[i] = tmp[i] / nrm
            if not np.isfinite(acc):
                escaped[r] = k
                for i in range(d):
                    x[i] = np.nan
                break
            for i in range(d):
                x[i] = tmp[i]
        for i in range(d):
            Y[r, i] = x[i]
    return Y, escaped
