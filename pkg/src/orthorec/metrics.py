"""Accuracy metrics for recurrence matrices, pencils and approximants.

All 2-norms are exact spectral norms computed from singular values; the
matrices involved are at most a few hundred wide.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import core
from .core import HessenbergPencil

#: Pairs whose runner-up distance is within this factor of the matched
#: distance are flagged as ambiguous in :func:`node_pairing`.
AMBIGUITY_FACTOR = 10.0


def _norm2(A) -> float:
    A = np.atleast_2d(np.asarray(A))
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def err_orthogonality(Q) -> float:
    """``||Q^H Q - I||_2``."""
    Q = np.asarray(Q)
    n = Q.shape[1]
    return _norm2(Q.conj().T @ Q - np.eye(n))


def err_recurrence(Z, Q, H) -> float:
    """Relative residual ``||ZQ - QH|| / max(||ZQ||, ||QH||)``.

    ``Z`` may be given as the node vector or as the diagonal matrix.
    """
    z = _diag(Z)
    Q = np.asarray(Q)
    ZQ = z[:, None] * Q
    QH = Q @ np.asarray(H)
    den = max(_norm2(ZQ), _norm2(QH))
    num = _norm2(ZQ - QH)
    return num / den if den > 0 else num


def err_recurrence_pencil(Z, Q, H, K) -> float:
    """Relative residual ``||ZQK - QH|| / max(||ZQK||, ||QH||)``."""
    z = _diag(Z)
    Q = np.asarray(Q)
    ZQK = z[:, None] * (Q @ np.asarray(K))
    QH = Q @ np.asarray(H)
    den = max(_norm2(ZQK), _norm2(QH))
    num = _norm2(ZQK - QH)
    return num / den if den > 0 else num


def err_weight(Q, w) -> float:
    """``|| ||w|| Q e_1 - w ||_2``."""
    w = np.asarray(w, dtype=complex)
    return float(np.linalg.norm(np.linalg.norm(w) * np.asarray(Q)[:, 0] - w))


def _diag(Z) -> np.ndarray:
    Z = np.asarray(Z)
    return np.diagonal(Z).astype(complex) if Z.ndim == 2 else Z.astype(complex).ravel()


@dataclass
class NodePairing:
    """Greedy node/eigenvalue assignment with an ambiguity flag per node."""

    distances: np.ndarray
    ambiguous: np.ndarray

    @property
    def error(self) -> float:
        return float(self.distances.max()) if self.distances.size else 0.0


def node_pairing(nodes, eigenvalues) -> NodePairing:
    """Pair every node with an eigenvalue, each eigenvalue used once.

    A node is ambiguous when a different eigenvalue lies within
    ``AMBIGUITY_FACTOR`` times its matched distance.
    """
    nodes = np.asarray(nodes, dtype=complex).ravel()
    lam = np.asarray(eigenvalues, dtype=complex).ravel()
    perm, dist = core.greedy_match(nodes, lam)
    amb = np.zeros(len(nodes), dtype=bool)
    if len(lam) > 1:
        D = np.abs(nodes[:, None] - lam[None, :])
        D[np.arange(len(nodes)), perm] = np.inf
        runner = D.min(axis=1)
        amb = runner < AMBIGUITY_FACTOR * np.maximum(dist, np.finfo(float).tiny)
    return NodePairing(dist, amb)


def err_node(nodes, H_or_pencil) -> float:
    """Largest distance between a node and its paired eigenvalue."""
    return node_pairing(nodes, _eigenvalues(H_or_pencil)).error


def _eigenvalues(H_or_pencil) -> np.ndarray:
    if isinstance(H_or_pencil, HessenbergPencil):
        return core.reference_eigen_pencil(H_or_pencil)
    return core.reference_eigen(H_or_pencil)


def err_pole(P: HessenbergPencil, poles) -> float:
    """Largest pole error over the subdiagonal positions.

    Finite poles are compared relatively, ``|xi - h/k| / |xi|`` (absolutely
    when ``xi = 0``); an infinite pole contributes ``|k / h|``.
    """
    pairs = P.pole_pairs()
    poles = np.asarray(poles, dtype=complex).ravel()
    if len(poles) != len(pairs):
        raise ValueError(f"expected {len(pairs)} poles, got {len(poles)}")
    out = 0.0
    for (h, k), xi in zip(pairs, poles):
        if not np.isfinite(xi):
            e = abs(k) / abs(h) if h != 0 else np.inf
        elif k == 0:
            e = np.inf
        else:
            e = abs(xi - h / k) / (abs(xi) if xi != 0 else 1.0)
        out = max(out, float(e))
    return out


def sample_points(interval: tuple[float, float], m: int) -> np.ndarray:
    """The ``10 m`` equidistant points, endpoints included, used for sup errors."""
    a, b = interval
    return np.linspace(a, b, 10 * m)


def err_sup_approx(f_true: Callable, g: Callable, interval: tuple[float, float], m: int) -> float:
    """Estimate ``||f - g||_inf`` on ``10 m`` equidistant points of ``interval``."""
    x = sample_points(interval, m)
    return float(np.max(np.abs(np.asarray(f_true(x)) - np.asarray(g(x)))))


def propagate_basis(Q, transform: Sequence = (), adjoint: bool = True, drop_first: bool = False,
                    phase=None) -> np.ndarray:
    """Carry a basis along a sequence of left cores.

    With ``adjoint`` the basis transforms as ``Q C^H`` for every core ``C``
    (the convention of all up- and downdating routines).  ``drop_first``
    removes the leading column and the row where that column concentrated,
    which is how a deflated node leaves the basis.
    """
    Q = np.array(Q, dtype=complex, order="C")
    core.cols_apply_seq(Q, list(transform), adjoint=adjoint)
    if drop_first:
        row = int(np.argmax(np.abs(Q[:, 0])))
        Q = np.ascontiguousarray(np.delete(Q, row, axis=0)[:, 1:])
    if phase is not None:
        Q *= np.asarray(phase)[None, :]
    return Q


@dataclass
class MetricReport:
    """Metrics of one step; ``err_p`` and ``err_f`` are ``None`` when not defined."""

    k: int
    err_o: float
    err_r: float
    err_w: float
    err_node: float
    err_p: float | None = None
    err_f: float | None = None
    ambiguous_nodes: int = 0
    extra: dict = field(default_factory=dict)

    def columns(self) -> list[str]:
        cols = ["k", "err_o", "err_r", "err_w", "err_node"]
        if self.err_p is not None:
            cols.append("err_p")
        if self.err_f is not None:
            cols.append("err_f")
        return cols

    def csv_row(self) -> str:
        vals = [str(self.k)] + [f"{getattr(self, c):.6e}" for c in self.columns()[1:]]
        return ",".join(vals)

    def values(self) -> dict:
        return {c: getattr(self, c) for c in self.columns()}

    def max_error(self) -> float:
        return max(v for c, v in self.values().items() if c != "k")


def report_matrix(k: int, nodes, weights, Q, H) -> MetricReport:
    pairing = node_pairing(nodes, core.reference_eigen(H))
    return MetricReport(
        k=k,
        err_o=err_orthogonality(Q),
        err_r=err_recurrence(nodes, Q, H),
        err_w=err_weight(Q, weights),
        err_node=pairing.error,
        ambiguous_nodes=int(pairing.ambiguous.sum()),
    )


def report_pencil(k: int, nodes, weights, poles, Q, P: HessenbergPencil) -> MetricReport:
    pairing = node_pairing(nodes, core.reference_eigen_pencil(P))
    return MetricReport(
        k=k,
        err_o=err_orthogonality(Q),
        err_r=err_recurrence_pencil(nodes, Q, P.h, P.k),
        err_w=err_weight(Q, weights),
        err_node=pairing.error,
        err_p=err_pole(P, poles),
        ambiguous_nodes=int(pairing.ambiguous.sum()),
    )


def report_solution(k: int, sol) -> MetricReport:
    """Metrics of a :class:`~orthorec.iep.HiepSolution` or ``HpiepSolution``."""
    if hasattr(sol, "pencil"):
        return report_pencil(k, sol.nodes, sol.weights, sol.poles, sol.q, sol.pencil)
    return report_matrix(k, sol.nodes, sol.weights, sol.q, sol.h)


def unitarity_defect(H) -> float:
    """``||H^H H - I||_2``; small when ``H`` encodes nodes on the unit circle."""
    H = np.asarray(H)
    return _norm2(H.conj().T @ H - np.eye(H.shape[0]))


def beyond_tridiagonal(H) -> float:
    """2-norm of the part of ``H`` strictly above the first superdiagonal."""
    return _norm2(np.triu(np.asarray(H), 2))
