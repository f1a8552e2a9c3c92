# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Signatures mirror :mod:`docdjinn._pycore`."""

from libc.math cimport sqrt
from libc.stdlib cimport free, malloc

import numpy as np

cimport numpy as cnp

cnp.import_array()


def levenshtein(str a, str b):
    """Unit-cost edit distance between two strings."""
    cdef Py_ssize_t n = len(a), m = len(b)
    cdef Py_ssize_t i, j
    cdef Py_ssize_t *prev
    cdef Py_ssize_t *cur
    cdef Py_ssize_t *tmp
    cdef Py_ssize_t cost, best
    cdef Py_UCS4 ca
    if n == 0:
        return m
    if m == 0:
        return n
    if n < m:
        a, b = b, a
        n, m = m, n
    prev = <Py_ssize_t *> malloc((m + 1) * sizeof(Py_ssize_t))
    cur = <Py_ssize_t *> malloc((m + 1) * sizeof(Py_ssize_t))
    if prev == NULL or cur == NULL:
        free(prev)
        free(cur)
        raise MemoryError()
    try:
        for j in range(m + 1):
            prev[j] = j
        for i in range(1, n + 1):
            ca = a[i - 1]
            cur[0] = i
            for j in range(1, m + 1):
                cost = 0 if ca == b[j - 1] else 1
                best = prev[j - 1] + cost
                if prev[j] + 1 < best:
                    best = prev[j] + 1
                if cur[j - 1] + 1 < best:
                    best = cur[j - 1] + 1
                cur[j] = best
            tmp = prev
            prev = cur
            cur = tmp
        return prev[m]
    finally:
        free(prev)
        free(cur)


def silhouette_samples(double[:, ::1] X, Py_ssize_t[::1] labels, Py_ssize_t n_clusters):
    """Per-point silhouette values, streaming one row of distances at a time.

    Memory is O(N + K) rather than the O(N^2) of a full distance matrix.
    """
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k, c, own
    cdef double acc, diff, a, b, mean
    sizes_arr = np.bincount(np.asarray(labels), minlength=n_clusters).astype(np.float64)
    cdef double[::1] sizes = sizes_arr
    sums_arr = np.zeros(n_clusters, dtype=np.float64)
    cdef double[::1] sums = sums_arr
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            for c in range(n_clusters):
                sums[c] = 0.0
            for j in range(n):
                if j == i:
                    continue
                acc = 0.0
                for k in range(d):
                    diff = X[i, k] - X[j, k]
                    acc = acc + diff * diff
                sums[labels[j]] += sqrt(acc)
            own = labels[i]
            if sizes[own] <= 1:
                out[i] = 0.0
                continue
            a = sums[own] / (sizes[own] - 1)
            b = -1.0
            for c in range(n_clusters):
                if c == own or sizes[c] == 0:
                    continue
                mean = sums[c] / sizes[c]
                if b < 0 or mean < b:
                    b = mean
            if b < 0:
                out[i] = 0.0
            elif a > b:
                out[i] = (b - a) / a
            elif b > 0:
                out[i] = (b - a) / b
            else:
                out[i] = 0.0
    return out_arr
