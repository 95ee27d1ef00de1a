# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled CTC forward-backward and Levenshtein DP."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, INFINITY, isfinite

cnp.import_array()


cdef inline double _lae(double a, double b) nogil:
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


def ctc_forward_backward(log_probs, labels, cnp.int64_t blank=0):
    cdef double[:, ::1] lp = np.ascontiguousarray(log_probs, dtype=np.float64)
    cdef cnp.int64_t[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef Py_ssize_t n_t = lp.shape[0], n_l = lab.shape[0]
    cdef Py_ssize_t n_s = 2 * n_l + 1
    cdef Py_ssize_t t, s
    ext_arr = np.full(n_s, blank, dtype=np.int64)
    cdef cnp.int64_t[::1] ext = ext_arr
    for s in range(n_l):
        ext[2 * s + 1] = lab[s]
    skip_arr = np.zeros(n_s, dtype=np.uint8)
    cdef unsigned char[::1] skip = skip_arr
    for s in range(2, n_s):
        skip[s] = ext[s] != blank and ext[s] != ext[s - 2]

    alpha_arr = np.full((n_t, n_s), -np.inf)
    beta_arr = np.full((n_t, n_s), -np.inf)
    grad_arr = np.zeros((lp.shape[0], lp.shape[1]))
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double acc, log_p

    with nogil:
        alpha[0, 0] = lp[0, ext[0]]
        if n_s > 1:
            alpha[0, 1] = lp[0, ext[1]]
        for t in range(1, n_t):
            for s in range(n_s):
                acc = alpha[t - 1, s]
                if s >= 1:
                    acc = _lae(acc, alpha[t - 1, s - 1])
                if skip[s]:
                    acc = _lae(acc, alpha[t - 1, s - 2])
                if acc != -INFINITY:
                    acc = acc + lp[t, ext[s]]
                alpha[t, s] = acc
        beta[n_t - 1, n_s - 1] = 0.0
        if n_s > 1:
            beta[n_t - 1, n_s - 2] = 0.0
        for t in range(n_t - 2, -1, -1):
            for s in range(n_s):
                acc = beta[t + 1, s] + lp[t + 1, ext[s]]
                if s + 1 < n_s:
                    acc = _lae(acc, beta[t + 1, s + 1] + lp[t + 1, ext[s + 1]])
                if s + 2 < n_s and skip[s + 2]:
                    acc = _lae(acc, beta[t + 1, s + 2] + lp[t + 1, ext[s + 2]])
                beta[t, s] = acc
        if n_s == 1:
            log_p = alpha[n_t - 1, 0]
        else:
            log_p = _lae(alpha[n_t - 1, n_s - 1], alpha[n_t - 1, n_s - 2])
        if isfinite(log_p):
            for t in range(n_t):
                for s in range(n_s):
                    if alpha[t, s] != -INFINITY and beta[t, s] != -INFINITY:
                        grad[t, ext[s]] -= exp(alpha[t, s] + beta[t, s] - log_p)
    if not isfinite(log_p):
        return float("inf"), np.zeros_like(grad_arr)
    return -log_p, grad_arr


def edit_table(ref, hyp):
    cdef cnp.int64_t[::1] r = np.ascontiguousarray(ref, dtype=np.int64)
    cdef cnp.int64_t[::1] h = np.ascontiguousarray(hyp, dtype=np.int64)
    cdef Py_ssize_t n = r.shape[0], m = h.shape[0], i, j
    table_arr = np.zeros((n + 1, m + 1), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] table = table_arr
    cdef cnp.int64_t best, c
    with nogil:
        for i in range(n + 1):
            table[i, 0] = i
        for j in range(m + 1):
            table[0, j] = j
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                best = table[i - 1, j - 1] + (r[i - 1] != h[j - 1])
                c = table[i - 1, j] + 1
                if c < best:
                    best = c
                c = table[i, j - 1] + 1
                if c < best:
                    best = c
                table[i, j] = best
    return table_arr
