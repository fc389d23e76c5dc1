# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops in ``_pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def walk_forward(p, R, Py_ssize_t i_max, double tie):
    cdef const double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef const double[::1] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef Py_ssize_t N = pv.shape[0], M = pv.shape[1]
    V_arr = np.zeros(M + i_max + 1)
    mask_arr = np.zeros((i_max + 1, N), dtype=np.uint8)
    cdef double[::1] V = V_arr
    cdef cnp.uint8_t[:, ::1] mask = mask_arr
    cdef double[::1] vals = np.empty(N)
    cdef Py_ssize_t i, a, m
    cdef double acc, best
    for i in range(i_max + 1):
        best = -1e308
        for a in range(N):
            acc = 0.0
            for m in range(1, M + 1):
                acc += pv[a, m - 1] * V[i + M - m]
            acc += Rv[a]
            vals[a] = acc
            if acc > best:
                best = acc
        V[i + M] = best
        for a in range(N):
            mask[i, a] = vals[a] >= best - tie
    return V_arr, mask_arr


def gs_sweep(r, P, double beta, W, double tie):
    cdef const double[:, ::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef const double[:, :, ::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t M = rv.shape[0], N = rv.shape[1]
    Wn_arr = np.array(W, dtype=np.float64)
    mask_arr = np.zeros((M, N), dtype=np.uint8)
    cdef double[::1] Wn = Wn_arr
    cdef cnp.uint8_t[:, ::1] mask = mask_arr
    cdef double[::1] vals = np.empty(N)
    cdef Py_ssize_t s, a, j
    cdef double acc, best
    for s in range(M):
        best = -1e308
        for a in range(N):
            acc = 0.0
            for j in range(M):
                acc += Pv[a, s, j] * Wn[j]
            acc = rv[s, a] + beta * acc
            vals[a] = acc
            if acc > best:
                best = acc
        Wn[s] = best
        for a in range(N):
            mask[s, a] = vals[a] >= best - tie
    return Wn_arr, mask_arr


def min_row_overlap(rows):
    cdef const double[:, ::1] X = np.ascontiguousarray(rows, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], M = X.shape[1]
    cdef Py_ssize_t i, k, l
    cdef double best = 1.0, acc, x, y
    if n == 0:
        return 1.0
    for i in range(n):
        acc = 0.0
        for l in range(M):
            acc += X[i, l]
        if acc < best:
            best = acc
    for i in range(n):
        for k in range(i + 1, n):
            acc = 0.0
            for l in range(M):
                x = X[i, l]
                y = X[k, l]
                acc += x if x < y else y
            if acc < best:
                best = acc
                if best <= 0.0:
                    return 0.0
    return best
