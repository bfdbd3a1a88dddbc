# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot numeric kernels.

Same interface as editsim._pykernels; see that module for the contract.
"""

from libc.math cimport exp, log1p, INFINITY

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"


cdef inline double logadd(double x, double y) noexcept nogil:
    cdef double t
    if x == -INFINITY:
        return y
    if y == -INFINITY:
        return x
    if x < y:
        t = x
        x = y
        y = t
    return x + log1p(exp(y - x))


def lev_distance(int[::1] a, int[::1] b):
    cdef Py_ssize_t la = a.shape[0], lb = b.shape[0]
    cdef Py_ssize_t i, j
    cdef long sub, dele, ins, best
    cdef long[::1] prev = np.arange(lb + 1, dtype=np.int64)
    cdef long[::1] cur = np.empty(lb + 1, dtype=np.int64)
    cdef long[::1] tmp
    cdef int ai
    with nogil:
        for i in range(1, la + 1):
            cur[0] = i
            ai = a[i - 1]
            for j in range(1, lb + 1):
                sub = prev[j - 1] + (0 if ai == b[j - 1] else 1)
                dele = prev[j] + 1
                ins = cur[j - 1] + 1
                best = sub
                if dele < best:
                    best = dele
                if ins < best:
                    best = ins
                cur[j] = best
            tmp = prev
            prev = cur
            cur = tmp
    return int(prev[lb])


def lev_script_counts(int[::1] a, int[::1] b, int m):
    cdef Py_ssize_t la = a.shape[0], lb = b.shape[0]
    cdef Py_ssize_t i, j
    cdef long sub, dele, ins, best
    cdef int ai
    d_arr = np.zeros((la + 1, lb + 1), dtype=np.int64)
    counts_arr = np.zeros((m, m), dtype=np.int64)
    cdef long[:, ::1] d = d_arr
    cdef long[:, ::1] counts = counts_arr
    with nogil:
        for i in range(1, la + 1):
            d[i, 0] = i
        for j in range(1, lb + 1):
            d[0, j] = j
        for i in range(1, la + 1):
            ai = a[i - 1]
            for j in range(1, lb + 1):
                sub = d[i - 1, j - 1] + (0 if ai == b[j - 1] else 1)
                dele = d[i - 1, j] + 1
                ins = d[i, j - 1] + 1
                best = sub
                if dele < best:
                    best = dele
                if ins < best:
                    best = ins
                d[i, j] = best
        # Backtrace with the fixed preference substitution > deletion > insertion.
        i = la
        j = lb
        while i > 0 or j > 0:
            if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (
                0 if a[i - 1] == b[j - 1] else 1
            ):
                counts[a[i - 1], b[j - 1]] += 1
                i -= 1
                j -= 1
            elif i > 0 and d[i, j] == d[i - 1, j] + 1:
                counts[a[i - 1], 0] += 1
                i -= 1
            else:
                counts[0, b[j - 1]] += 1
                j -= 1
    return counts_arr


def weighted_distance(double[:, ::1] costs, int[::1] a, int[::1] b):
    cdef Py_ssize_t la = a.shape[0], lb = b.shape[0]
    cdef Py_ssize_t i, j
    cdef double sub, dele, ins, best
    cdef int ai
    cdef double[::1] prev = np.empty(lb + 1, dtype=np.float64)
    cdef double[::1] cur = np.empty(lb + 1, dtype=np.float64)
    cdef double[::1] tmp
    with nogil:
        prev[0] = 0.0
        for j in range(1, lb + 1):
            prev[j] = prev[j - 1] + costs[0, b[j - 1]]
        for i in range(1, la + 1):
            ai = a[i - 1]
            cur[0] = prev[0] + costs[ai, 0]
            for j in range(1, lb + 1):
                sub = prev[j - 1] + costs[ai, b[j - 1]]
                dele = prev[j] + costs[ai, 0]
                ins = cur[j - 1] + costs[0, b[j - 1]]
                best = sub
                if dele < best:
                    best = dele
                if ins < best:
                    best = ins
                cur[j] = best
            tmp = prev
            prev = cur
            cur = tmp
    return float(prev[lb])


cdef void _forward_fill(
    double[:, ::1] F, double[:, ::1] logc, int[::1] a, int[::1] b
) noexcept nogil:
    cdef Py_ssize_t la = a.shape[0], lb = b.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc
    F[0, 0] = 0.0
    for j in range(1, lb + 1):
        F[0, j] = logc[0, b[j - 1]] + F[0, j - 1]
    for i in range(1, la + 1):
        F[i, 0] = logc[a[i - 1], 0] + F[i - 1, 0]
        for j in range(1, lb + 1):
            acc = logc[a[i - 1], b[j - 1]] + F[i - 1, j - 1]
            acc = logadd(acc, logc[a[i - 1], 0] + F[i - 1, j])
            acc = logadd(acc, logc[0, b[j - 1]] + F[i, j - 1])
            F[i, j] = acc


cdef void _backward_fill(
    double[:, ::1] B, double[:, ::1] logc, int[::1] a, int[::1] b
) noexcept nogil:
    cdef Py_ssize_t la = a.shape[0], lb = b.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc
    B[la, lb] = 0.0
    for j in range(lb - 1, -1, -1):
        B[la, j] = logc[0, b[j]] + B[la, j + 1]
    for i in range(la - 1, -1, -1):
        B[i, lb] = logc[a[i], 0] + B[i + 1, lb]
        for j in range(lb - 1, -1, -1):
            acc = logc[a[i], b[j]] + B[i + 1, j + 1]
            acc = logadd(acc, logc[a[i], 0] + B[i + 1, j])
            acc = logadd(acc, logc[0, b[j]] + B[i, j + 1])
            B[i, j] = acc


def forward_log(double[:, ::1] logc, int[::1] a, int[::1] b):
    F_arr = np.empty((a.shape[0] + 1, b.shape[0] + 1), dtype=np.float64)
    cdef double[:, ::1] F = F_arr
    with nogil:
        _forward_fill(F, logc, a, b)
    return F_arr


def backward_log(double[:, ::1] logc, int[::1] a, int[::1] b):
    B_arr = np.empty((a.shape[0] + 1, b.shape[0] + 1), dtype=np.float64)
    cdef double[:, ::1] B = B_arr
    with nogil:
        _backward_fill(B, logc, a, b)
    return B_arr


def em_pair_counts(
    double[:, ::1] logc, int[::1] a, int[::1] b, double[:, ::1] delta
):
    cdef Py_ssize_t la = a.shape[0], lb = b.shape[0]
    cdef Py_ssize_t i, j
    cdef double logpe, k
    F_arr = np.empty((la + 1, lb + 1), dtype=np.float64)
    B_arr = np.empty((la + 1, lb + 1), dtype=np.float64)
    cdef double[:, ::1] F = F_arr
    cdef double[:, ::1] B = B_arr
    with nogil:
        _forward_fill(F, logc, a, b)
        _backward_fill(B, logc, a, b)
    logpe = logc[0, 0] + F[la, lb]
    if logpe == -INFINITY:
        return float(logpe)
    k = logc[0, 0] - logpe
    with nogil:
        for i in range(1, la + 1):
            for j in range(1, lb + 1):
                delta[a[i - 1], b[j - 1]] += exp(
                    F[i - 1, j - 1] + logc[a[i - 1], b[j - 1]] + B[i, j] + k
                )
        for i in range(1, la + 1):
            for j in range(lb + 1):
                delta[a[i - 1], 0] += exp(
                    F[i - 1, j] + logc[a[i - 1], 0] + B[i, j] + k
                )
        for i in range(la + 1):
            for j in range(1, lb + 1):
                delta[0, b[j - 1]] += exp(
                    F[i, j - 1] + logc[0, b[j - 1]] + B[i, j] + k
                )
        delta[0, 0] += 1.0
    return float(logpe)


def solve_kernel(
    double[:, :, ::1] W1, double[::1] rho1, double[:, :, ::1] W2, double[::1] rho2
):
    cdef Py_ssize_t s = W1.shape[0]
    cdef Py_ssize_t n1 = W1.shape[1], n2 = W2.shape[1]
    cdef Py_ssize_t n = n1 * n2
    cdef Py_ssize_t i, j, k, l, bb, r, c
    cdef double acc, piv
    cdef bint bad = 0
    M_arr = np.zeros((n, n), dtype=np.float64)
    v_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] M = M_arr
    cdef double[::1] v = v_arr
    with nogil:
        # Upper-triangular product matrix: arcs only move forward in both factors.
        for i in range(n1):
            for j in range(n2):
                r = i * n2 + j
                for k in range(i, n1):
                    for l in range(j, n2):
                        c = k * n2 + l
                        acc = 0.0
                        for bb in range(s):
                            acc += W1[bb, i, k] * W2[bb, j, l]
                        M[r, c] = acc
        for r in range(n - 1, -1, -1):
            piv = 1.0 - M[r, r]
            if piv <= 0.0:
                bad = 1
                break
            acc = rho1[r // n2] * rho2[r % n2]
            for c in range(r + 1, n):
                acc += M[r, c] * v[c]
            v[r] = acc / piv
    if bad:
        return float("nan")
    return float(v[0])
