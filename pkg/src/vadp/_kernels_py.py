"""Pure-numpy versions of the compiled kernels.

Loop order matches ``_kernels.pyx``: ``assemble`` accumulates members one
at a time, so Dirac and single-member results are bit-identical across
backends. The fixed-point solvers vectorise the inner sums and may differ
from the compiled ones in the last few ulps.
"""

import numpy as np


def value_iteration(T, R, gamma, tol, max_iter):
    S, A = R.shape
    V = np.zeros(S)
    Q = np.zeros((S, A))
    it = 0
    res = 0.0
    while it < max_iter:
        it += 1
        Q = R + gamma * (T @ V)
        Vn = Q.max(axis=1)
        res = float(np.max(np.abs(Vn - V))) if S else 0.0
        V = Vn
        if res <= tol:
            break
    return Q, V, it, res


def policy_evaluation(T, r, gamma, tol, max_iter):
    V = np.zeros(len(r))
    it = 0
    res = 0.0
    while it < max_iter:
        it += 1
        Vn = r + gamma * (T @ V)
        res = float(np.max(np.abs(Vn - V))) if len(r) else 0.0
        V = Vn
        if res <= tol:
            break
    return V, it, res


def assemble(weights, keys, rows, rewards, qvals):
    out = np.zeros(rows.shape[1])
    rbar = 0.0
    qbar = 0.0
    for w, k in zip(weights.tolist(), keys.tolist()):
        out += w * rows[k]
        rbar += w * rewards[k]
        qbar += w * qvals[k]
    return out, rbar, qbar
