"""Discrete least squares in an orthonormal polynomial or rational basis.

The basis is represented by a recurrence matrix ``H`` (or pencil ``(H, K)``)
together with the tracked unitary ``Q``.  Row ``j`` of ``Q`` holds
``w_j * [r_0(z_j), ..., r_{m-1}(z_j)]``, so ``r_0 = 1 / ||w||`` and the
remaining functions follow from running the recurrence.  :class:`WindowState`
carries a solution through a sequence of down- and updates.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import core
from .core import HessenbergPencil, cols_apply
from .errors import Breakdown, DegreeTooLarge, EvaluationAtPole
from .iep import HiepSolution, HpiepSolution, as_poles, update_node
from .poly_downdate import DowndateRequest, RefinementConfig, downdate
from .rational_downdate import PencilDowndateRequest, downdate_pencil, pole_swap

#: Method names accepted by :class:`WindowState`, mapped to (method, RQ steps).
MATRIX_METHODS = {
    "explicit1": ("explicit", 1),
    "implicit1": ("implicit", 1),
    "implicit2": ("implicit", 2),
    "eigenvector": ("eigenvector", 1),
}
PENCIL_METHODS = {"implicit": "implicit", "implicit1": "implicit", "eigenvector": "eigenvector"}


# -- basis evaluation ---------------------------------------------------------

def _pencil_of(sol) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(sol, HpiepSolution):
        return sol.pencil.h, sol.pencil.k
    return sol.h, None


def evaluate_basis(sol, z, n: int | None = None) -> np.ndarray:
    """Values ``r_0(z), ..., r_{n-1}(z)`` of the orthonormal basis of ``sol``.

    ``z`` may be a scalar or an array; the result has shape ``z.shape + (n,)``.

    Raises
    ------
    EvaluationAtPole
        If ``z`` coincides with one of the first ``n - 1`` finite poles.
    """
    H, K = _pencil_of(sol)
    return basis_values(H, K, float(np.linalg.norm(sol.weights)), z, n)


def basis_values(H, K, weight_norm: float, z, n: int | None = None) -> np.ndarray:
    """Run the recurrence of ``H`` (``K = None``) or of the pencil ``(H, K)`` at ``z``."""
    m = H.shape[0]
    n = m if n is None else int(n)
    if not 1 <= n <= m:
        raise DegreeTooLarge(f"n must lie in [1, {m}], got {n}")
    z = np.asarray(z, dtype=complex)
    zf = z.reshape(-1)
    R = np.zeros((zf.size, n), dtype=complex)
    R[:, 0] = 1.0 / weight_norm
    scale = float(np.linalg.norm(H)) + (float(np.linalg.norm(K)) if K is not None else 1.0)
    for j in range(n - 1):
        if K is None:
            acc = zf * R[:, j] - R[:, : j + 1] @ H[: j + 1, j]
            den = np.full(zf.size, H[j + 1, j])
        else:
            acc = zf * (R[:, : j + 1] @ K[: j + 1, j]) - R[:, : j + 1] @ H[: j + 1, j]
            den = H[j + 1, j] - zf * K[j + 1, j]
        if np.any(np.abs(den) <= core.EPS * scale):
            raise EvaluationAtPole(f"evaluation point coincides with pole {j}")
        R[:, j + 1] = acc / den
    return R.reshape(z.shape + (n,))


# -- least squares --------------------------------------------------------------

@dataclass
class ApproximantModel:
    """``g(z) = sum_d coefficients[d] * r_d(z)`` for the leading ``n`` basis functions."""

    coefficients: np.ndarray
    h: np.ndarray
    k: np.ndarray | None
    weight_norm: float

    @property
    def n(self) -> int:
        return len(self.coefficients)

    def __call__(self, z) -> np.ndarray:
        return evaluate_model(self, z)

    def to_json(self) -> str:
        return json.dumps({
            "n": self.n,
            "coefficients_re": self.coefficients.real.tolist(),
            "coefficients_im": self.coefficients.imag.tolist(),
        }, indent=2)


def lsq_fit(sol, f_values, n: int) -> ApproximantModel:
    """Least squares fit of ``f_values`` (one per node) in the first ``n`` basis functions.

    The coefficients are ``Q_n^H (w * f)``.
    """
    f = np.asarray(f_values, dtype=complex).ravel()
    m = sol.m
    if len(f) != m:
        raise ValueError(f"expected {m} function values, got {len(f)}")
    if not 1 <= n <= m:
        raise DegreeTooLarge(f"n must lie in [1, {m}], got {n}")
    alpha = sol.q[:, :n].conj().T @ (sol.weights * f)
    H, K = _pencil_of(sol)
    return ApproximantModel(
        alpha,
        np.ascontiguousarray(H[:n, :n]),
        None if K is None else np.ascontiguousarray(K[:n, :n]),
        float(np.linalg.norm(sol.weights)),
    )


def evaluate_model(model: ApproximantModel, z) -> np.ndarray:
    R = basis_values(model.h, model.k, model.weight_norm, z, model.n)
    out = R @ model.coefficients
    return out if np.ndim(z) else complex(out)


# -- I/O -------------------------------------------------------------------------

def read_data_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read nodes, weights and values from columns ``z_re,z_im,w_re,w_im,f_re,f_im``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")

    def col(name):
        try:
            return np.array([float(r[name]) for r in rows])
        except KeyError:
            raise ValueError(f"{path}: missing column {name!r}") from None

    z = col("z_re") + 1j * col("z_im")
    w = col("w_re") + 1j * col("w_im")
    f = col("f_re") + 1j * col("f_im")
    return z, w, f


# -- sliding window --------------------------------------------------------------

@dataclass
class WindowState:
    """A solution with tracked ``Q`` that is advanced by down- and updates.

    ``method`` names the downdating procedure: one of :data:`MATRIX_METHODS`
    for matrices, ``'implicit'`` or ``'eigenvector'`` for pencils.
    """

    sol: HiepSolution | HpiepSolution
    method: str = "implicit1"
    refinement: RefinementConfig = field(default_factory=RefinementConfig)
    k: int = 0
    diagnostics: list = field(default_factory=list)

    def __post_init__(self):
        table = PENCIL_METHODS if self.is_pencil else MATRIX_METHODS
        if self.method not in table:
            raise ValueError(f"unknown method {self.method!r} for this solution type")

    @property
    def is_pencil(self) -> bool:
        return isinstance(self.sol, HpiepSolution)

    @property
    def m(self) -> int:
        return self.sol.m

    @property
    def nodes(self) -> np.ndarray:
        return self.sol.nodes

    def downdate(self, index: int, pole_index: int | None = None) -> dict:
        """Remove node ``index`` (and for pencils the pole ``pole_index``, default last)."""
        sol = self.sol
        z = sol.nodes[index]
        keep_nodes = np.delete(sol.nodes, index)
        keep_weights = np.delete(sol.weights, index)
        if self.is_pencil:
            req = PencilDowndateRequest(z, pole_index, PENCIL_METHODS[self.method], self.refinement)
            out = downdate_pencil(sol.pencil, sol.weights, req)
            q, _ = out.propagate(sol.q, row=index)
            p = sol.m - 2 if pole_index is None else pole_index
            self.sol = HpiepSolution(q, out.pencil_reduced, keep_nodes, keep_weights,
                                     np.delete(sol.poles, p))
        else:
            name, steps = MATRIX_METHODS[self.method]
            out = downdate(name, sol.h, sol.weights, DowndateRequest(z, steps, self.refinement))
            q, _ = out.propagate(sol.q, row=index)
            self.sol = HiepSolution(q, out.h_reduced, keep_nodes, keep_weights)
        self.diagnostics.append(out.diagnostics)
        return out.diagnostics

    def update(self, z, w, xi=None) -> None:
        self.sol = update_node(self.sol, z, w, xi)

    def move_pole(self, src: int, dst: int) -> None:
        """Move the pole at position ``src`` to ``dst`` by adjacent swaps."""
        if not self.is_pencil:
            raise TypeError("only pencils carry poles")
        sol = self.sol
        P, q, poles = sol.pencil, sol.q.copy(), list(sol.poles)
        step = 1 if dst > src else -1
        for i in range(src, dst, step):
            j = min(i, i + step)
            P, L, _ = pole_swap(P, j)
            cols_apply(q, L, adjoint=True)
            poles[j], poles[j + 1] = poles[j + 1], poles[j]
        self.sol = HpiepSolution(q, P, sol.nodes, sol.weights, as_poles(poles))


def slide_window(state: WindowState, new_nodes: Sequence, new_weights: Sequence,
                 new_poles: Sequence | None = None, drop_count: int = 2,
                 drop_pole_index: int | None = None,
                 pole_destinations: Sequence[int | None] | None = None) -> WindowState:
    """Drop the first ``drop_count`` nodes, then append the new nodes.

    For pencils every dropped node also removes the pole at
    ``drop_pole_index`` (default: the last one) and every new node brings the
    matching entry of ``new_poles``, which is appended last and then moved to
    the corresponding entry of ``pole_destinations`` when that is not ``None``.
    Breakdowns are re-raised with ``step`` set to the window step.
    """
    if len(new_nodes) != len(new_weights):
        raise ValueError("new_nodes and new_weights differ in length")
    if state.is_pencil and (new_poles is None or len(new_poles) != len(new_nodes)):
        raise ValueError("a pole is required for every new node")
    step = state.k + 1
    try:
        for _ in range(drop_count):
            state.downdate(0, drop_pole_index if state.is_pencil else None)
        for t, (z, w) in enumerate(zip(new_nodes, new_weights)):
            if state.is_pencil:
                state.update(z, w, new_poles[t])
                dst = None if pole_destinations is None else pole_destinations[t]
                if dst is not None:
                    state.move_pole(state.m - 2, dst)
            else:
                state.update(z, w)
    except Breakdown as exc:
        exc.step = step
        raise
    state.k = step
    return state


def sup_error(f: Callable, model: ApproximantModel, interval, m: int) -> float:
    """``max |f - g|`` on ``10 m`` equidistant points of ``interval``."""
    from .metrics import err_sup_approx

    return err_sup_approx(f, lambda x: evaluate_model(model, x.astype(complex)), interval, m)
