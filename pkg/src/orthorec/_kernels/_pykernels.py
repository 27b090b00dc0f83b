"""Pure numpy implementations of the hot loops.

Every function here has a drop-in twin in ``_ckernels.pyx``; both operate
in place on C-contiguous complex128 arrays.
"""
import numpy as np


def rot_rows(A, i, g00, g01, g10, g11, j0, j1):
    a = A[i, j0:j1].copy()
    b = A[i + 1, j0:j1]
    A[i, j0:j1] = g00 * a + g01 * b
    A[i + 1, j0:j1] = g10 * a + g11 * b


def rot_cols(A, j, g00, g01, g10, g11, i0, i1):
    a = A[i0:i1, j].copy()
    b = A[i0:i1, j + 1]
    A[i0:i1, j] = a * g00 + b * g10
    A[i0:i1, j + 1] = a * g01 + b * g11


def apply_rows_seq(A, idx, G, j0, j1):
    for t in range(len(idx)):
        g = G[t]
        rot_rows(A, idx[t], g[0, 0], g[0, 1], g[1, 0], g[1, 1], j0, j1)


def apply_cols_seq(A, idx, G, i0, i1):
    for t in range(len(idx)):
        g = G[t]
        rot_cols(A, idx[t], g[0, 0], g[0, 1], g[1, 0], g[1, 1], i0, i1)


def forward_recurrence(M):
    m = M.shape[0]
    u = np.zeros(m, dtype=complex)
    u[0] = 1.0
    for k in range(m - 1):
        u[k + 1] = -(u[: k + 1] @ M[: k + 1, k]) / M[k + 1, k]
    return u


def backward_correct(M, x, tol):
    m = M.shape[0]
    tail2 = abs(x[m - 1]) ** 2
    fixes = 0
    for i in range(m - 1, 0, -1):
        res = M[i, i - 1:] @ x[i - 1:]
        denom = np.sqrt(tail2 + abs(x[i - 1]) ** 2)
        if abs(res) > tol * denom:
            x[i - 1] -= res / M[i, i - 1]
            fixes += 1
        tail2 += abs(x[i - 1]) ** 2
    return fixes


def forward_correct(M, u, tol):
    m = M.shape[0]
    a2 = np.abs(u) ** 2
    suffix = np.concatenate([np.cumsum(a2[::-1])[::-1], [0.0, 0.0]])
    fixes = 0
    for i in range(m - 1):
        res = u[: i + 2] @ M[: i + 2, i]
        lo = max(i - 1, 0)
        denom = np.sqrt(np.sum(np.abs(u[lo:i + 2]) ** 2) + suffix[i + 2])
        if abs(res) > tol * denom:
            u[i + 1] -= res / M[i + 1, i]
            fixes += 1
    return fixes
