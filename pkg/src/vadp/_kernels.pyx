# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; see ``_kernels_py`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def value_iteration(const double[:, :, ::1] T, const double[:, ::1] R,
                    double gamma, double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t S = T.shape[0], A = T.shape[1], S2 = T.shape[2]
    cdef Py_ssize_t s, a, t, it = 0
    cdef double acc, best, res = 0.0, diff
    Q_arr = np.zeros((S, A))
    V_arr = np.zeros(S)
    Vn_arr = np.zeros(S)
    cdef double[:, ::1] Q = Q_arr
    cdef double[::1] V = V_arr
    cdef double[::1] Vn = Vn_arr
    while it < max_iter:
        it += 1
        res = 0.0
        for s in range(S):
            best = -1e300
            for a in range(A):
                acc = 0.0
                for t in range(S2):
                    acc += T[s, a, t] * V[t]
                Q[s, a] = R[s, a] + gamma * acc
                if Q[s, a] > best:
                    best = Q[s, a]
            Vn[s] = best
        for s in range(S):
            diff = fabs(Vn[s] - V[s])
            if diff > res:
                res = diff
            V[s] = Vn[s]
        if res <= tol:
            break
    return Q_arr, V_arr, it, res


def policy_evaluation(const double[:, ::1] T, const double[::1] r,
                      double gamma, double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t K = T.shape[0], i, j, it = 0
    cdef double acc, res = 0.0, diff
    V_arr = np.zeros(K)
    Vn_arr = np.zeros(K)
    cdef double[::1] V = V_arr
    cdef double[::1] Vn = Vn_arr
    while it < max_iter:
        it += 1
        res = 0.0
        for i in range(K):
            acc = 0.0
            for j in range(K):
                acc += T[i, j] * V[j]
            Vn[i] = r[i] + gamma * acc
        for i in range(K):
            diff = fabs(Vn[i] - V[i])
            if diff > res:
                res = diff
            V[i] = Vn[i]
        if res <= tol:
            break
    return V_arr, it, res


def assemble(const double[::1] weights, const long[::1] keys,
             const double[:, ::1] rows, const double[::1] rewards,
             const double[::1] qvals):
    cdef Py_ssize_t m = weights.shape[0], S = rows.shape[1], i, t
    cdef long k
    cdef double w, rbar = 0.0, qbar = 0.0
    out_arr = np.zeros(S)
    cdef double[::1] out = out_arr
    for i in range(m):
        w = weights[i]
        k = keys[i]
        for t in range(S):
            out[t] += w * rows[k, t]
        rbar += w * rewards[k]
        qbar += w * qvals[k]
    return out_arr, rbar, qbar
