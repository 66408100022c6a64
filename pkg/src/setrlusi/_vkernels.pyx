# cython: language_level=3
"""Compiled versions of the hot numeric kernels.

The dominance-fraction matrix multiplies per-coordinate fractions in
ascending coordinate order, matching ``_kernels_py`` bit for bit.
"""

from libc.math cimport exp

import numpy as np

cimport numpy as cnp

cnp.import_array()


def v_matrix(cnp.ndarray[cnp.float64_t, ndim=2] samples):
    cdef Py_ssize_t q = samples.shape[0]
    cdef Py_ssize_t d = samples.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.ones((q, q))
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cnt
    cdef double[:, ::1] v = out
    cdef long long[:] c_view
    cdef double qf = <double> q
    cdef double term
    cdef Py_ssize_t c, i, j
    cdef long long a, b

    for c in range(d):
        col = samples[:, c]
        ordered = np.sort(col)
        cnt = (q - np.searchsorted(ordered, col, side="left")).astype(np.int64)
        c_view = cnt
        for i in range(q):
            a = c_view[i]
            for j in range(i, q):
                b = c_view[j]
                term = (<double> (a if a < b else b)) / qf
                v[i, j] *= term
    for i in range(q):
        for j in range(i + 1, q):
            v[j, i] = v[i, j]
    return out


def rbf_kernel(
    cnp.ndarray[cnp.float64_t, ndim=2] rows,
    cnp.ndarray[cnp.float64_t, ndim=2] centers,
    double sigma,
):
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t m = centers.shape[0]
    cdef Py_ssize_t d = rows.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, m))
    cdef double[:, ::1] g = out
    cdef double[:, ::1] x = np.ascontiguousarray(rows)
    cdef double[:, ::1] ctr = np.ascontiguousarray(centers)
    cdef double inv = 1.0 / (2.0 * sigma * sigma)
    cdef double acc, diff
    cdef Py_ssize_t i, k, c

    for i in range(n):
        for k in range(m):
            acc = 0.0
            for c in range(d):
                diff = x[i, c] - ctr[k, c]
                acc += diff * diff
            g[i, k] = exp(-acc * inv)
    return out
