"""Recurrence matrices and pencils from nodes, weights and poles.

``solve_hiep`` runs Arnoldi on ``diag(nodes)``; ``solve_hpiep`` runs rational
Arnoldi.  ``update_node`` appends one node (and, for pencils, one pole) to an
existing solution without rebuilding it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import core
from .core import HessenbergPencil, cols_apply, rows_apply
from .errors import Breakdown, DuplicateNode, PoleEqualsNode

NODE_SEPARATION = 1e-14


def is_infinite(xi) -> bool:
    return xi is None or bool(np.isinf(xi))


def pole_pair(xi) -> tuple[complex, complex]:
    """Projective pair ``(mu, nu)`` with ``xi = mu / nu`` and ``|mu|^2 + |nu|^2 = 1``."""
    if is_infinite(xi):
        return 1.0 + 0j, 0j
    xi = complex(xi)
    t = 1.0 / math.sqrt(1.0 + abs(xi) ** 2)
    return xi * t, complex(t)


def as_poles(poles) -> np.ndarray:
    """Complex array of poles; ``None`` or any infinite value becomes ``inf``."""
    out = np.empty(len(poles), dtype=complex)
    for i, xi in enumerate(poles):
        out[i] = complex(np.inf, 0) if is_infinite(xi) else complex(xi)
    return out


def _check_distinct(nodes, scale=None):
    z = np.asarray(nodes, dtype=complex)
    if len(z) < 2:
        return
    if scale is None:
        scale = max(float(np.abs(z).max()), 1e-300)
    zs = z[np.lexsort((z.imag, z.real))]
    # sorting by real part only puts near-duplicates next to each other when
    # imaginary parts also agree, so fall back to the full check for safety
    if np.any(np.abs(np.diff(zs)) <= NODE_SEPARATION * scale):
        raise DuplicateNode("nodes are not pairwise distinct")
    D = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(D, np.inf)
    if D.min() <= NODE_SEPARATION * scale:
        raise DuplicateNode("nodes are not pairwise distinct")


@dataclass
class InnerProductSpec:
    """Nodes and weights of the discrete inner product sum |w_i|^2 conj(g(z_i)) f(z_i)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes = np.atleast_1d(np.asarray(self.nodes, dtype=complex)).copy()
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=complex)).copy()
        if self.nodes.ndim != 1 or self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        if len(self.nodes) == 0:
            raise ValueError("at least one node is required")
        if not (np.all(np.isfinite(self.nodes)) and np.all(np.isfinite(self.weights))):
            raise ValueError("nodes and weights must be finite")
        if np.any(self.weights == 0):
            raise ValueError("all weights must be nonzero")
        _check_distinct(self.nodes)

    @property
    def m(self) -> int:
        return len(self.nodes)


def check_poles(poles, nodes) -> np.ndarray:
    poles = as_poles(poles)
    nodes = np.asarray(nodes, dtype=complex)
    scale = max(float(np.abs(nodes).max()), 1.0)
    finite = ~np.isinf(poles)
    if np.any(finite):
        gap = np.abs(poles[finite][:, None] - nodes[None, :]).min()
        if gap <= NODE_SEPARATION * scale:
            raise PoleEqualsNode("a pole coincides with a node")
    return poles


@dataclass
class HiepSolution:
    """``diag(nodes) @ q = q @ h`` with ``q`` unitary and ``q[:, 0] = w / ||w||``."""

    q: np.ndarray
    h: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def m(self) -> int:
        return self.h.shape[0]

    def residuals(self) -> dict:
        Z = self.nodes[:, None]
        w = self.weights
        nw = np.linalg.norm(w)
        return {
            "recurrence": float(np.linalg.norm(Z * self.q - self.q @ self.h, 2)),
            "orthogonality": float(np.linalg.norm(self.q.conj().T @ self.q - np.eye(self.m), 2)),
            "weight": float(np.linalg.norm(nw * self.q[:, 0] - w)),
        }


@dataclass
class HpiepSolution:
    """``diag(nodes) @ q @ k = q @ h`` with pole ``i`` equal to ``h[i+1,i] / k[i+1,i]``."""

    q: np.ndarray
    pencil: HessenbergPencil
    nodes: np.ndarray
    weights: np.ndarray
    poles: np.ndarray

    @property
    def m(self) -> int:
        return self.pencil.m

    @property
    def h(self) -> np.ndarray:
        return self.pencil.h

    @property
    def k(self) -> np.ndarray:
        return self.pencil.k

    def residuals(self) -> dict:
        Z = self.nodes[:, None]
        w = self.weights
        nw = np.linalg.norm(w)
        q, h, k = self.q, self.pencil.h, self.pencil.k
        return {
            "recurrence": float(np.linalg.norm(Z * (q @ k) - q @ h, 2)),
            "orthogonality": float(np.linalg.norm(q.conj().T @ q - np.eye(self.m), 2)),
            "weight": float(np.linalg.norm(nw * q[:, 0] - w)),
        }


def _orthogonalize(Q, j, y):
    """Two passes of classical Gram-Schmidt of ``y`` against ``Q[:, :j]``."""
    B = Q[:, :j]
    c = B.conj().T @ y
    y = y - B @ c
    c2 = B.conj().T @ y
    y = y - B @ c2
    return c + c2, y


def solve_hiep(spec: InnerProductSpec) -> HiepSolution:
    """Arnoldi on ``diag(nodes)`` started from the normalized weight vector."""
    z, w = spec.nodes, spec.weights
    m = spec.m
    scale = float(np.abs(z).max()) or 1.0
    Q = np.zeros((m, m), dtype=complex)
    H = np.zeros((m, m), dtype=complex)
    Q[:, 0] = w / np.linalg.norm(w)
    for j in range(m):
        c, y = _orthogonalize(Q, j + 1, z * Q[:, j])
        H[: j + 1, j] = c
        if j + 1 < m:
            beta = np.linalg.norm(y)
            if beta <= m * core.EPS * scale:
                raise Breakdown(f"Arnoldi breakdown at step {j}: duplicate node or zero weight")
            H[j + 1, j] = beta
            Q[:, j + 1] = y / beta
    return HiepSolution(Q, H, z.copy(), w.copy())


def solve_hpiep(spec: InnerProductSpec, poles: Sequence, method: str = "arnoldi") -> HpiepSolution:
    """Pencil for the given ``m - 1`` poles, by rational Arnoldi or by updating.

    ``method='update'`` adds the nodes one at a time with :func:`update_node`,
    which only applies unitary transformations and therefore returns a unitary
    ``k``.  Rational Arnoldi makes column ``j`` of ``k`` proportional to
    ``Q^H (nu_j Z - mu_j)^{-1} q_j``; with many poles close to the nodes these
    columns become numerically dependent and the pencil nearly singular, so
    prefer ``'update'`` in that regime.

    Step ``j`` expands with ``(nu Z - mu)^{-1} (rho Z - eta) q_j`` where
    ``(mu, nu)`` is the pole and the continuation root ``(eta, rho) =
    (conj(nu), -conj(mu))`` is orthogonal to it.  Infinite poles reduce to
    plain Arnoldi steps, so all-infinite poles give ``k = I``.
    """
    z, w = spec.nodes, spec.weights
    m = spec.m
    if len(poles) != m - 1:
        raise ValueError(f"expected {m - 1} poles, got {len(poles)}")
    poles = check_poles(poles, z)
    if method == "update":
        return _hpiep_by_updating(z, w, poles)
    if method != "arnoldi":
        raise ValueError("method must be 'arnoldi' or 'update'")
    Q = np.zeros((m, m), dtype=complex)
    H = np.zeros((m, m), dtype=complex)
    K = np.zeros((m, m), dtype=complex)
    Q[:, 0] = w / np.linalg.norm(w)
    for j in range(m - 1):
        mu, nu = pole_pair(poles[j])
        eta, rho = np.conj(nu), -np.conj(mu)
        y = (rho * z - eta) * Q[:, j] / (nu * z - mu)
        c, y = _orthogonalize(Q, j + 1, y)
        beta = np.linalg.norm(y)
        if beta <= m * core.EPS * max(np.linalg.norm(c), 1.0):
            raise Breakdown(f"rational Arnoldi breakdown at step {j}")
        Q[:, j + 1] = y / beta
        col = np.zeros(j + 2, dtype=complex)
        col[: j + 1] = c
        col[j + 1] = beta
        K[: j + 2, j] = nu * col
        K[j, j] += np.conj(mu)
        H[: j + 2, j] = mu * col
        H[j, j] -= np.conj(nu)
    # the last column is free; take it orthogonal to the others so K stays regular
    k = np.linalg.qr(K[:, : m - 1], mode="complete")[0][:, -1] if m > 1 else np.ones(1, dtype=complex)
    j = m - 1 if abs(k[m - 1]) > 0.5 / math.sqrt(m) else int(np.argmax(np.abs(k)))
    K[:, m - 1] = k * np.conj(k[j]) / abs(k[j])
    H[:, m - 1] = Q.conj().T @ (z * (Q @ K[:, m - 1]))
    return HpiepSolution(Q, HessenbergPencil(H, K), z.copy(), w.copy(), poles)


def _hpiep_by_updating(z, w, poles) -> HpiepSolution:
    pencil = HessenbergPencil(np.array([[z[0]]], dtype=complex), np.ones((1, 1), dtype=complex))
    w0 = complex(w[0])
    sol = HpiepSolution(np.full((1, 1), w0 / abs(w0)), pencil, z[:1].copy(), w[:1].copy(),
                        np.zeros(0, dtype=complex))
    for j in range(1, len(z)):
        sol = update_node(sol, z[j], w[j], poles[j - 1])
    return sol


def _phase(v: complex) -> complex:
    a = abs(v)
    return v / a if a else 1.0 + 0j


def _append_node_basis(q: np.ndarray) -> np.ndarray:
    """Basis for nodes ``[old..., new]`` of ``blkdiag(1, H)`` type extensions."""
    m = q.shape[0]
    out = np.zeros((m + 1, m + 1), dtype=complex)
    out[:m, 1:] = q
    out[m, 0] = 1.0
    return out


def update_node(sol, z_new, w_new, xi_new=None):
    """Append node ``z_new`` with weight ``w_new`` (and pole ``xi_new`` for pencils).

    The new node is placed in front, the weight image ``(w_new, ||w||, 0, ...)``
    is rotated onto ``e_1`` and structure is restored: by a downward bulge
    chase for matrices, or by swapping the intermediate pole ``z_new`` to the
    last pole position and replacing it by ``xi_new`` for pencils.
    """
    z_new = complex(z_new)
    w_new = complex(w_new)
    if w_new == 0:
        raise ValueError("weight must be nonzero")
    nodes = np.append(sol.nodes, z_new)
    weights = np.append(sol.weights, w_new)
    _check_distinct(nodes)
    nw = float(np.linalg.norm(sol.weights))
    m = sol.m
    q = _append_node_basis(sol.q)
    if isinstance(sol, HpiepSolution):
        if xi_new is None:
            raise ValueError("a pole is required to update a pencil")
        poles = check_poles(np.append(sol.poles, as_poles([xi_new])), nodes)
        H = np.zeros((m + 1, m + 1), dtype=complex)
        K = np.zeros((m + 1, m + 1), dtype=complex)
        H[0, 0], K[0, 0] = z_new, 1.0
        H[1:, 1:], K[1:, 1:] = sol.pencil.h, sol.pencil.k
        c0 = core.make_core(w_new, nw, 0)
        rows_apply(H, c0)
        rows_apply(K, c0)
        cols_apply(q, c0, adjoint=True)
        P = HessenbergPencil(H, K, _checked=True)
        from .rational_downdate import _swap_inplace, _change_last_inplace

        for i in range(m - 1):
            L, R = _swap_inplace(P, i)
            if L is not None:
                cols_apply(q, L, adjoint=True)
        _change_last_inplace(P, poles[-1])
        d = _phase(c0.c * w_new + c0.s * nw)
        P.h[0, :] *= np.conj(d)
        P.k[0, :] *= np.conj(d)
        q[:, 0] *= d
        sub = np.abs(np.diagonal(P.h, -1)) + np.abs(np.diagonal(P.k, -1))
        if sub.min() <= (m + 1) * core.EPS * max(np.linalg.norm(P.h), np.linalg.norm(P.k)):
            raise Breakdown("pencil update produced a vanishing pole position")
        return HpiepSolution(q, P, nodes, weights, poles)
    H = np.zeros((m + 1, m + 1), dtype=complex)
    H[0, 0] = z_new
    H[1:, 1:] = sol.h
    v = np.zeros(m + 1, dtype=complex)
    v[0], v[1] = w_new, nw
    H, cores, v = restore_weight_structure(H, v)
    core.cols_apply_seq(q, cores, adjoint=True)
    d = _phase(v[0])
    H[0, :] *= np.conj(d)
    H[:, 0] *= d
    q[:, 0] *= d
    if not core.is_proper(H, (m + 1) * core.EPS):
        raise Breakdown("update produced a vanishing subdiagonal")
    return HiepSolution(q, H, nodes, weights)


def restore_weight_structure(H, v):
    """Rotate a weight image with nonzeros in positions 0 and 1 onto ``e_1``.

    A core on (0, 1) maps ``v`` to a multiple of ``e_1``; the similarity it
    induces leaves a bulge at (2, 0) which is chased down and off the matrix.
    Returns ``(H', cores, v')`` where the cores are in application order
    (``H' = ... C_1 C_0 H C_0^H C_1^H ...``).
    """
    H = np.array(H, dtype=complex, order="C")
    v = np.array(v, dtype=complex)
    m = H.shape[0]
    if m == 1 or v[1] == 0:
        return H, [], v
    first = core.make_core(v[0], v[1], 0)
    v[0] = first.c * v[0] + first.s * v[1]
    v[1] = 0
    cores = [first]
    rows_apply(H, first, 0, m)
    cols_apply(H, first, 0, min(3, m), adjoint=True)
    for i in range(1, m - 1):
        # bulge sits at (i + 1, i - 1)
        cc = core.make_core(H[i, i - 1], H[i + 1, i - 1], i)
        rows_apply(H, cc, i - 1, m)
        H[i + 1, i - 1] = 0
        cols_apply(H, cc, 0, min(i + 3, m), adjoint=True)
        cores.append(cc)
    core.zero_below_subdiagonal(H)
    return H, cores, v
