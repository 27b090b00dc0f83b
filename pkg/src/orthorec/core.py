"""Dense complex kernels: core transformations, Hessenberg helpers, shifted RQ.

Indices are 0-based throughout: a core transformation with ``index=i`` acts
on rows (or columns) ``i`` and ``i + 1``.  Its active block is

    G = [[c,        s],
         [-conj(s), c]]      with c real, c >= 0 and c**2 + |s|**2 = 1.

Upper Hessenberg matrices and pencils are plain ``complex128`` numpy arrays;
every routine in the package writes exact zeros below the first subdiagonal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from . import _kernels as kern
from .errors import ConvergenceFailure, IndexOutOfRange, NotProper, ZeroPair

EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical thresholds; all must be strictly positive."""

    eps_mach: float = EPS
    deflation_factor: float = 3.0
    properness_tol: float = 1e-14
    orth_tol: float = 1e-12

    def __post_init__(self):
        for name in ("eps_mach", "deflation_factor", "properness_tol", "orth_tol"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")


DEFAULT_TOL = ToleranceConfig()


@dataclass(frozen=True)
class CoreTransformation:
    """A 2x2 unitary block embedded at rows/columns ``(index, index + 1)``."""

    index: int
    c: float
    s: complex

    @property
    def block(self) -> np.ndarray:
        return np.array([[self.c, self.s], [-np.conj(self.s), self.c]], dtype=complex)

    @property
    def H(self) -> "CoreTransformation":
        """The inverse (conjugate transpose) core."""
        return CoreTransformation(self.index, self.c, -self.s)

    def embed(self, m: int) -> np.ndarray:
        if self.index < 0 or self.index + 1 >= m:
            raise IndexOutOfRange(f"core index {self.index} does not fit in dimension {m}")
        out = np.eye(m, dtype=complex)
        out[self.index:self.index + 2, self.index:self.index + 2] = self.block
        return out


IDENTITY = (1.0, 0j)


def _core_params(a: complex, b: complex) -> tuple[float, complex]:
    """(c, s) with G @ [a, b] = [r, 0]."""
    aa, ab = abs(a), abs(b)
    if ab == 0.0:
        return IDENTITY
    if aa == 0.0:
        return 0.0, complex(np.conj(b) / ab)
    rho = math.hypot(aa, ab)
    return aa / rho, complex((a / aa) * np.conj(b) / rho)


def make_core(a: complex, b: complex, index: int = 0) -> CoreTransformation:
    """Core that maps the column ``(a, b)`` to ``(r, 0)`` with ``|r| = hypot(|a|, |b|)``."""
    if a == 0 and b == 0:
        raise ZeroPair("cannot build a core transformation from (0, 0)")
    c, s = _core_params(complex(a), complex(b))
    return CoreTransformation(int(index), c, s)


def _row_core_params(a: complex, b: complex) -> tuple[float, complex]:
    """(c, s) with [a, b] @ G^H = [0, r]: annihilates the left entry of a row."""
    aa, ab = abs(a), abs(b)
    if aa == 0.0:
        return IDENTITY
    if ab == 0.0:
        return 0.0, complex(-np.conj(a) / aa)
    rho = math.hypot(aa, ab)
    c = ab / rho
    return c, complex(-np.conj(a) * c / np.conj(b))


def make_row_core(a: complex, b: complex, index: int = 0) -> CoreTransformation:
    """Core C such that the row ``[a, b] @ C^H`` is ``[0, r]``."""
    c, s = _row_core_params(complex(a), complex(b))
    return CoreTransformation(int(index), c, s)


# -- in-place application ----------------------------------------------------
#
# These helpers mutate C-contiguous complex arrays and accept an optional
# index range so that Hessenberg sparsity can be exploited.

def rows_apply(A, core: CoreTransformation, j0=0, j1=None, adjoint=False):
    """A[i:i+2, j0:j1] <- G @ A[i:i+2, j0:j1] (or G^H when ``adjoint``)."""
    c, s = core.c, core.s
    if adjoint:
        s = -s
    kern.rot_rows(A, core.index, c, s, -s.conjugate(), c, j0, A.shape[1] if j1 is None else j1)


def cols_apply(A, core: CoreTransformation, i0=0, i1=None, adjoint=False):
    """A[i0:i1, j:j+2] <- A[i0:i1, j:j+2] @ G (or @ G^H when ``adjoint``)."""
    c, s = core.c, core.s
    if adjoint:
        s = -s
    kern.rot_cols(A, core.index, c, s, -s.conjugate(), c, i0, A.shape[0] if i1 is None else i1)


def _stack(cores: Sequence[CoreTransformation], adjoint=False):
    idx = np.fromiter((cc.index for cc in cores), dtype=np.int64, count=len(cores))
    G = np.empty((len(cores), 2, 2), dtype=complex)
    for t, cc in enumerate(cores):
        s = -cc.s if adjoint else cc.s
        G[t, 0, 0] = cc.c
        G[t, 0, 1] = s
        G[t, 1, 0] = -s.conjugate()
        G[t, 1, 1] = cc.c
    return idx, G


def rows_apply_seq(A, cores, adjoint=False):
    """Apply ``cores`` one after the other from the left (first element first)."""
    if len(cores):
        idx, G = _stack(cores, adjoint)
        kern.apply_rows_seq(A, idx, G, 0, A.shape[1])


def cols_apply_seq(A, cores, adjoint=False):
    """Right-multiply by ``cores`` one after the other (first element first)."""
    if len(cores):
        idx, G = _stack(cores, adjoint)
        kern.apply_cols_seq(A, idx, G, 0, A.shape[0])


def _as_work(A) -> np.ndarray:
    return np.array(A, dtype=complex, order="C", copy=True)


def apply_core_left(core: CoreTransformation, A) -> np.ndarray:
    """Return ``C @ A`` for the embedded core (vectors are treated as columns)."""
    A = _as_work(A)
    vec = A.ndim == 1
    if vec:
        A = A.reshape(-1, 1).copy()
    if core.index < 0 or core.index + 1 >= A.shape[0]:
        raise IndexOutOfRange(f"core index {core.index} out of range for {A.shape[0]} rows")
    rows_apply(A, core)
    return A.ravel() if vec else A


def apply_core_right(core: CoreTransformation, A) -> np.ndarray:
    """Return ``A @ C`` for the embedded core (vectors are treated as rows)."""
    A = _as_work(A)
    vec = A.ndim == 1
    if vec:
        A = A.reshape(1, -1).copy()
    if core.index < 0 or core.index + 1 >= A.shape[1]:
        raise IndexOutOfRange(f"core index {core.index} out of range for {A.shape[1]} columns")
    cols_apply(A, core)
    return A.ravel() if vec else A


def cores_product(cores: Sequence[CoreTransformation], m: int) -> np.ndarray:
    """Dense ``C_0 @ C_1 @ ...`` in the order given."""
    P = np.eye(m, dtype=complex)
    cols_apply_seq(P, list(cores))
    return P


# -- Hessenberg helpers -------------------------------------------------------

def zero_below_subdiagonal(A) -> np.ndarray:
    """Write exact zeros below the first subdiagonal (in place) and return A."""
    m = A.shape[0]
    if m > 2:
        A[np.tril_indices(m, -2)] = 0
    return A


def as_hessenberg(A) -> np.ndarray:
    """Validated complex copy of an upper Hessenberg matrix."""
    A = _as_work(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if A.shape[0] > 2 and np.any(np.tril(A, -2) != 0):
        raise ValueError("matrix has nonzeros below the first subdiagonal")
    return A


@dataclass
class HessenbergPencil:
    """A pair ``(h, k)`` of upper Hessenberg matrices of equal size.

    Pole position ``i`` (0-based) is the pair ``(h[i+1, i], k[i+1, i])``.
    """

    h: np.ndarray
    k: np.ndarray
    _checked: bool = field(default=False, repr=False)

    def __post_init__(self):
        if not self._checked:
            self.h = as_hessenberg(self.h)
            self.k = as_hessenberg(self.k)
            if self.h.shape != self.k.shape:
                raise ValueError("pencil matrices differ in size")
        self._checked = True

    @property
    def m(self) -> int:
        return self.h.shape[0]

    def copy(self) -> "HessenbergPencil":
        return HessenbergPencil(self.h.copy(), self.k.copy(), _checked=True)

    def pole_pairs(self) -> np.ndarray:
        m = self.m
        i = np.arange(m - 1)
        return np.stack([self.h[i + 1, i], self.k[i + 1, i]], axis=1)

    def poles(self) -> np.ndarray:
        """Pole ratios ``h[i+1,i] / k[i+1,i]``; a zero k-part gives ``inf``."""
        pairs = self.pole_pairs()
        out = np.empty(len(pairs), dtype=complex)
        for t, (hh, kk) in enumerate(pairs):
            out[t] = complex(np.inf, 0) if kk == 0 else hh / kk
        return out


def is_proper(H, tol: float = DEFAULT_TOL.properness_tol) -> bool:
    H = np.asarray(H)
    m = H.shape[0]
    if m == 1:
        return True
    sub = np.abs(np.diagonal(H, -1))
    return bool(sub.min() > tol * np.linalg.norm(H))


def _two_columns_independent(a, b, tol) -> bool:
    M = np.stack([a, b], axis=1)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale == 0:
        return False
    _, R, _ = sla.qr(M, mode="economic", pivoting=True)
    return bool(abs(R[1, 1]) > tol * scale) if R.shape[0] > 1 else False


def is_proper_pencil(P: HessenbergPencil, tol: float = DEFAULT_TOL.properness_tol) -> bool:
    H, K = P.h, P.k
    m = P.m
    scale = max(np.linalg.norm(H), np.linalg.norm(K))
    if m > 1:
        sub = np.abs(np.diagonal(H, -1)) + np.abs(np.diagonal(K, -1))
        if sub.min() <= tol * scale:
            return False
    if m == 1:
        return bool(abs(H[0, 0]) + abs(K[0, 0]) > 0)
    return _two_columns_independent(H[:, 0], K[:, 0], tol) and _two_columns_independent(
        H[-1, :], K[-1, :], tol
    )


def rq_factorize_shifted(H, shift: complex = 0.0, check: bool = True):
    """RQ factorization ``H - shift*I = R @ C_0 @ C_1 @ ... @ C_{m-2}``.

    Returns the upper triangular ``R`` and the list of cores.  The cores are
    generated from the last row upwards; the list is returned in product
    order (``C_0`` first).
    """
    A = _as_work(H)
    m = A.shape[0]
    if check and not is_proper(A):
        raise NotProper("RQ factorization needs a proper Hessenberg matrix")
    A[np.diag_indices(m)] -= shift
    cores = [None] * (m - 1)
    for k in range(m - 1, 0, -1):
        core = make_row_core(A[k, k - 1], A[k, k], k - 1)
        cols_apply(A, core, 0, k + 1, adjoint=True)
        A[k, k - 1] = 0
        cores[k - 1] = core
    return A, cores


def reduce_to_e1(x) -> tuple[list[CoreTransformation], complex]:
    """Cores with ``C_0 @ ... @ C_{m-2} @ x = alpha * e_1``.

    The cores are built bottom-up; the returned list is in product order.
    """
    v = np.array(x, dtype=complex)
    m = v.shape[0]
    cores = [None] * (m - 1)
    for i in range(m - 2, -1, -1):
        c, s = _core_params(v[i], v[i + 1])
        core = CoreTransformation(i, c, s)
        a, b = v[i], v[i + 1]
        v[i] = c * a + s * b
        v[i + 1] = 0
        cores[i] = core
    return cores, complex(v[0])


def reference_eigen(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.shape[0] < 1:
        raise ValueError("empty matrix")
    try:
        return sla.eigvals(H, check_finite=True)
    except sla.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceFailure(str(exc)) from exc


def reference_eigen_pencil(P: HessenbergPencil) -> np.ndarray:
    """Generalized eigenvalues ``alpha / beta`` of ``(h, k)``; ``inf`` for beta = 0."""
    try:
        ab = sla.eigvals(P.h, P.k, homogeneous_eigvals=True)
    except sla.LinAlgError as exc:  # pragma: no cover
        raise ConvergenceFailure(str(exc)) from exc
    alpha, beta = ab
    out = np.full(alpha.shape, complex(np.inf, 0))
    ok = beta != 0
    out[ok] = alpha[ok] / beta[ok]
    return out


def greedy_match(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Pair each entry of ``a`` with a distinct entry of ``b``, nearest pairs first.

    Returns ``(perm, dist)`` with ``b[perm[j]]`` matched to ``a[j]``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    D = np.abs(a[:, None] - b[None, :])
    order = np.argsort(D, axis=None, kind="stable")
    used_a = np.zeros(len(a), dtype=bool)
    used_b = np.zeros(len(b), dtype=bool)
    perm = np.full(len(a), -1)
    left = min(len(a), len(b))
    for flat in order:
        i, j = divmod(int(flat), len(b))
        if used_a[i] or used_b[j]:
            continue
        perm[i] = j
        used_a[i] = used_b[j] = True
        left -= 1
        if left == 0:
            break
    dist = np.array([D[i, perm[i]] if perm[i] >= 0 else np.inf for i in range(len(a))])
    return perm, dist
