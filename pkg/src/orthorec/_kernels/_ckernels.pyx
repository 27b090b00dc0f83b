# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the loops in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef extern from "complex.h" nogil:
    double cabs(double complex)


cdef inline void _rows(double complex[:, ::1] A, Py_ssize_t i,
                       double complex g00, double complex g01,
                       double complex g10, double complex g11,
                       Py_ssize_t j0, Py_ssize_t j1) noexcept nogil:
    cdef Py_ssize_t j
    cdef double complex a, b
    for j in range(j0, j1):
        a = A[i, j]
        b = A[i + 1, j]
        A[i, j] = g00 * a + g01 * b
        A[i + 1, j] = g10 * a + g11 * b


cdef inline void _cols(double complex[:, ::1] A, Py_ssize_t j,
                       double complex g00, double complex g01,
                       double complex g10, double complex g11,
                       Py_ssize_t i0, Py_ssize_t i1) noexcept nogil:
    cdef Py_ssize_t i
    cdef double complex a, b
    for i in range(i0, i1):
        a = A[i, j]
        b = A[i, j + 1]
        A[i, j] = a * g00 + b * g10
        A[i, j + 1] = a * g01 + b * g11


def rot_rows(double complex[:, ::1] A, Py_ssize_t i,
             double complex g00, double complex g01,
             double complex g10, double complex g11,
             Py_ssize_t j0, Py_ssize_t j1):
    _rows(A, i, g00, g01, g10, g11, j0, j1)


def rot_cols(double complex[:, ::1] A, Py_ssize_t j,
             double complex g00, double complex g01,
             double complex g10, double complex g11,
             Py_ssize_t i0, Py_ssize_t i1):
    _cols(A, j, g00, g01, g10, g11, i0, i1)


def apply_rows_seq(double complex[:, ::1] A, cnp.int64_t[::1] idx,
                   double complex[:, :, ::1] G, Py_ssize_t j0, Py_ssize_t j1):
    cdef Py_ssize_t t
    with nogil:
        for t in range(idx.shape[0]):
            _rows(A, idx[t], G[t, 0, 0], G[t, 0, 1], G[t, 1, 0], G[t, 1, 1], j0, j1)


def apply_cols_seq(double complex[:, ::1] A, cnp.int64_t[::1] idx,
                   double complex[:, :, ::1] G, Py_ssize_t i0, Py_ssize_t i1):
    cdef Py_ssize_t t
    with nogil:
        for t in range(idx.shape[0]):
            _cols(A, idx[t], G[t, 0, 0], G[t, 0, 1], G[t, 1, 0], G[t, 1, 1], i0, i1)


def forward_recurrence(double complex[:, ::1] M):
    cdef Py_ssize_t m = M.shape[0]
    cdef Py_ssize_t i, k
    cdef double complex acc
    out = np.zeros(m, dtype=np.complex128)
    cdef double complex[::1] u = out
    u[0] = 1.0
    with nogil:
        for k in range(m - 1):
            acc = 0
            for i in range(k + 1):
                acc = acc + u[i] * M[i, k]
            u[k + 1] = -acc / M[k + 1, k]
    return out


def backward_correct(double complex[:, ::1] M, double complex[::1] x, double tol):
    cdef Py_ssize_t m = M.shape[0]
    cdef Py_ssize_t i, k
    cdef double complex res
    cdef double tail2 = cabs(x[m - 1]) ** 2
    cdef double denom
    cdef int fixes = 0
    with nogil:
        for i in range(m - 1, 0, -1):
            res = 0
            for k in range(i - 1, m):
                res = res + M[i, k] * x[k]
            denom = sqrt(tail2 + cabs(x[i - 1]) ** 2)
            if cabs(res) > tol * denom:
                x[i - 1] = x[i - 1] - res / M[i, i - 1]
                fixes += 1
            tail2 = tail2 + cabs(x[i - 1]) ** 2
    return fixes


def forward_correct(double complex[:, ::1] M, double complex[::1] u, double tol):
    cdef Py_ssize_t m = M.shape[0]
    cdef Py_ssize_t i, k, lo
    cdef double complex res
    cdef double denom
    cdef int fixes = 0
    suffix_arr = np.zeros(m + 2, dtype=np.float64)
    cdef double[::1] suffix = suffix_arr
    with nogil:
        for k in range(m - 1, -1, -1):
            suffix[k] = suffix[k + 1] + cabs(u[k]) ** 2
        for i in range(m - 1):
            res = 0
            for k in range(i + 2):
                res = res + u[k] * M[k, i]
            lo = i - 1 if i > 0 else 0
            denom = suffix[i + 2]
            for k in range(lo, i + 2):
                denom = denom + cabs(u[k]) ** 2
            denom = sqrt(denom)
            if cabs(res) > tol * denom:
                u[i + 1] = u[i + 1] - res / M[i + 1, i]
                fixes += 1
    return fixes
