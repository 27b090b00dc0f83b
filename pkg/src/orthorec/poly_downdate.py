"""Removing a node from a polynomial recurrence matrix.

Three methods are provided.  The explicit method forms ``Q R + z I`` from the
shifted RQ factorization; the implicit method chases the same similarity
upwards from the last row; the eigenvector method reduces a carefully refined
eigenvector to ``e_1``.  All of them isolate the node in position (0, 0) and
return the trailing Hessenberg block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import _kernels as kern
from . import core
from .core import cols_apply, rows_apply
from .errors import (
    Breakdown,
    DeflationFailed,
    NotProper,
    RecurrenceBreakdown,
    SingularSolve,
    TrailingAccuracyFailed,
)
from .iep import restore_weight_structure

EPS = core.EPS
DEFLATION_FACTOR = 100.0


@dataclass(frozen=True)
class RefinementConfig:
    """``n_ir`` refinement rounds at most, checking the residual every ``batch`` rounds.

    ``gate`` is the relative residual ``||(H - zI) x|| / ||H - zI||_2`` above
    which a refined eigenvector is considered unusable and the eigenvector
    method reports a breakdown.  The default ``inf`` never gates: the
    trailing correction usually repairs even a poor eigenvector.
    """

    n_ir: int = 1
    batch: int = 1
    gate: float = math.inf

    def __post_init__(self):
        if int(self.n_ir) != self.n_ir or self.n_ir < 0:
            raise ValueError("n_ir must be a non-negative integer")
        if int(self.batch) != self.batch or self.batch < 1:
            raise ValueError("batch must be a positive integer")
        if not self.gate > 0:
            raise ValueError("gate must be positive")


@dataclass(frozen=True)
class DowndateRequest:
    target_node: complex
    steps: int = 1
    refinement: RefinementConfig = field(default_factory=RefinementConfig)

    def __post_init__(self):
        if self.steps not in (1, 2):
            raise ValueError("steps must be 1 or 2")
        object.__setattr__(self, "target_node", complex(self.target_node))


@dataclass
class DowndateOutcome:
    """Result of removing one node.

    ``transform`` lists the cores of the full-size similarity in application
    order; ``trailing_transform`` and ``phase`` act on the deflated block.  Use
    :meth:`propagate` to carry an orthonormal basis along.
    """

    h_reduced: np.ndarray
    transform: list
    deflation_residual: float
    diagnostics: dict = field(default_factory=dict)
    trailing_transform: list = field(default_factory=list)
    phase: np.ndarray | None = None

    def propagate(self, q: np.ndarray, row: int | None = None) -> tuple[np.ndarray, int]:
        """Apply the recorded transformations to ``q``; return ``(q_new, removed_row)``."""
        q = np.array(q, dtype=complex, order="C")
        core.cols_apply_seq(q, self.transform, adjoint=True)
        if row is None:
            row = int(np.argmax(np.abs(q[:, 0])))
        keep = np.ones(q.shape[0], dtype=bool)
        keep[row] = False
        qt = np.ascontiguousarray(q[keep, 1:])
        core.cols_apply_seq(qt, self.trailing_transform, adjoint=True)
        if self.phase is not None:
            qt *= self.phase[None, :]
        return qt, row


# -- helpers ------------------------------------------------------------------

def _threshold(H) -> float:
    return DEFLATION_FACTOR * EPS * float(np.linalg.norm(H))


def norm2_estimate(M, iters: int = 25) -> float:
    """Power-iteration estimate of the spectral norm of a square matrix."""
    M = np.asarray(M)
    m = M.shape[0]
    if m == 1:
        return float(abs(M[0, 0]))
    v = np.ones(m, dtype=complex) + 1j * np.linspace(0.0, 1.0, m)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        y = M @ v
        ny = np.linalg.norm(y)
        if ny == 0:
            break
        v = M.conj().T @ y
        nv = np.linalg.norm(v)
        est = max(est, math.sqrt(nv))
        if nv == 0:
            break
        v /= nv
    return float(max(est, np.linalg.norm(M) / math.sqrt(m)))


def _shifted(H, z):
    M = np.array(H, dtype=complex, order="C")
    M[np.diag_indices(M.shape[0])] -= z
    return M


def _check(H):
    H = core.as_hessenberg(H)
    if not core.is_proper(H):
        raise NotProper("downdating needs a proper Hessenberg matrix")
    return H


def _finish(H, cores, v, diagnostics, residual):
    """Deflate the leading node, fix the weight image and the phase."""
    m = H.shape[0]
    Ht = np.ascontiguousarray(H[1:, 1:])
    vt = v[1:].copy()
    trailing = []
    if m > 2 and np.any(vt[1:] != 0):
        Ht, trailing, vt = restore_weight_structure(Ht, vt)
    core.zero_below_subdiagonal(Ht)
    phase = np.ones(m - 1, dtype=complex)
    a = abs(vt[0])
    if a:
        phase[0] = vt[0] / a
    Ht[0, :] *= np.conj(phase[0])
    Ht[:, 0] *= phase[0]
    return DowndateOutcome(Ht, cores, residual, diagnostics, trailing, phase)


def _weight_image(m, cores):
    v = np.zeros((m, 1), dtype=complex)
    v[0, 0] = 1.0
    core.rows_apply_seq(v, cores)
    return v[:, 0]


def _coupling(H):
    return float(max(abs(H[1, 0]), np.linalg.norm(H[0, 1:]) if H.shape[0] > 1 else 0.0))


# -- explicit -----------------------------------------------------------------

def _explicit_step(H, z):
    """One RQ step ``Q R + z I``; returns the new matrix and cores in application order."""
    R, cores = core.rq_factorize_shifted(H, z, check=False)
    m = R.shape[0]
    for cc in reversed(cores):
        rows_apply(R, cc, max(cc.index - 1, 0), m)
        # Q R is Hessenberg; the row rotation would otherwise fill nothing below
    R[np.diag_indices(m)] += z
    core.zero_below_subdiagonal(R)
    return R, list(reversed(cores))


def downdate_explicit(H, req: DowndateRequest) -> DowndateOutcome:
    """Remove ``req.target_node`` with one or two explicit RQ steps."""
    H = _check(H)
    m = H.shape[0]
    if m < 2:
        raise ValueError("cannot downdate a 1x1 matrix")
    thr = _threshold(H)
    z = req.target_node
    applied = []
    residuals = []
    for _ in range(req.steps):
        H, cores = _explicit_step(H, z)
        applied.extend(cores)
        residuals.append(float(abs(H[1, 0])))
    eps_t = residuals[-1]
    if eps_t > thr:
        raise DeflationFailed(f"deflation residual {eps_t:.3e} exceeds {thr:.3e}", residual=eps_t)
    diag = {"epsilon_steps": residuals, "coupling": _coupling(H), "threshold": thr}
    return _finish(H, applied, _weight_image(m, applied), diag, eps_t)


# -- implicit -----------------------------------------------------------------

def _implicit_step(H, z):
    """Upward-chased RQ step, in place; returns cores in application order."""
    m = H.shape[0]
    cores = []
    i = m - 2
    cc = core.make_row_core(H[m - 1, m - 2], H[m - 1, m - 1] - z, i)
    while True:
        cols_apply(H, cc, 0, min(i + 3, m), adjoint=True)
        if i + 2 < m:
            H[i + 2, i] = 0
        rows_apply(H, cc, max(i - 1, 0), m)
        cores.append(cc)
        if i == 0:
            break
        # bulge now sits at (i + 1, i - 1)
        i -= 1
        cc = core.make_row_core(H[i + 2, i], H[i + 2, i + 1], i)
    core.zero_below_subdiagonal(H)
    return cores


def downdate_implicit(H, req: DowndateRequest) -> DowndateOutcome:
    """Remove ``req.target_node`` with one or two implicitly chased RQ steps."""
    H = _check(H)
    m = H.shape[0]
    if m < 2:
        raise ValueError("cannot downdate a 1x1 matrix")
    thr = _threshold(H)
    z = req.target_node
    applied = []
    residuals = []
    for _ in range(req.steps):
        applied.extend(_implicit_step(H, z))
        residuals.append(float(abs(H[1, 0])))
    eps_t = residuals[-1]
    if eps_t > thr:
        raise DeflationFailed(f"deflation residual {eps_t:.3e} exceeds {thr:.3e}", residual=eps_t)
    diag = {"epsilon_steps": residuals, "coupling": _coupling(H), "threshold": thr}
    return _finish(H, applied, _weight_image(m, applied), diag, eps_t)


# -- eigenvector method -------------------------------------------------------

def eigenvector_from_recurrence(H, w, z) -> np.ndarray:
    """Normalized eigenvector of ``H`` for node ``z`` by running the recurrence.

    Row ``j`` of the basis holds ``w_j`` times the orthonormal polynomials at
    ``z_j`` and is a left eigenvector; for normal ``H`` its conjugate is the
    right eigenvector.  The weight only fixes a scale, so it drops out after
    normalization.
    """
    H = np.asarray(H, dtype=complex)
    m = H.shape[0]
    if m == 1:
        return np.ones(1, dtype=complex)
    M = _shifted(H, z)
    if np.any(np.diagonal(M, -1) == 0):
        raise RecurrenceBreakdown("zero subdiagonal entry in the recurrence")
    u = kern.forward_recurrence(M)
    if not np.all(np.isfinite(u)):
        raise RecurrenceBreakdown("recurrence overflowed")
    x = np.conj(u)
    return x / np.linalg.norm(x)


def evec_residual(H, z, x) -> float:
    return float(np.linalg.norm(_shifted(H, z) @ x))


class RQSolver:
    """Solves with a nearly singular Hessenberg ``M`` through its RQ factorization.

    Diagonal entries of ``R`` below ``floor`` are lifted to ``floor`` (keeping
    their phase), which turns a solve with a perfect shift into one step of
    inverse iteration.
    """

    def __init__(self, M, floor: float):
        if not floor > 0:
            raise SingularSolve("regularization floor must be positive")
        R, cores = core.rq_factorize_shifted(M, 0.0, check=False)
        d = np.diagonal(R)
        for i in np.nonzero(np.abs(d) < floor)[0]:
            ph = d[i] / abs(d[i]) if d[i] != 0 else 1.0
            R[i, i] = floor * ph
        self.R = R
        self.cores = cores

    def _finite(self, y):
        if not np.all(np.isfinite(y)):
            raise SingularSolve("refinement solve produced non-finite values")
        return y

    def solve(self, b) -> np.ndarray:
        """``M y = b`` with ``M = R C_0 ... C_{m-2}``."""
        y = sla.solve_triangular(self.R, b, lower=False, check_finite=False)
        yy = np.array(y, dtype=complex).reshape(-1, 1)
        core.rows_apply_seq(yy, self.cores, adjoint=True)
        return self._finite(yy[:, 0])

    def solve_adjoint(self, b) -> np.ndarray:
        """``M^H y = b``."""
        bb = np.array(b, dtype=complex).reshape(-1, 1)
        core.rows_apply_seq(bb, self.cores[::-1])
        y = sla.solve_triangular(self.R, bb[:, 0], lower=False, trans="C", check_finite=False)
        return self._finite(np.asarray(y, dtype=complex))


def _inverse_iteration_solver(H, z):
    H = np.asarray(H, dtype=complex)
    return RQSolver(_shifted(H, z), EPS * float(np.linalg.norm(H))).solve


def refine_loop(residual, solve, x, cfg: RefinementConfig, bound: float):
    """Inverse iteration ``x <- solve(x) / ||.||`` checked every ``cfg.batch`` rounds.

    Returns the vector with the smallest residual seen at a check point and a
    record of the residual trace.
    """
    res = residual(x)
    record = {"initial_residual": res, "bound": bound, "rounds": 0, "residuals": [res]}
    best, best_res = x, res
    rounds = 0
    if res > bound:
        while rounds < cfg.n_ir:
            for _ in range(min(cfg.batch, cfg.n_ir - rounds)):
                y = solve(x)
                x = y / np.linalg.norm(y)
                rounds += 1
            res = residual(x)
            record["residuals"].append(res)
            if res < best_res:
                best, best_res = x, res
            if res <= bound:
                break
    record["rounds"] = rounds
    record["final_residual"] = best_res
    record["met"] = best_res <= bound
    return best, record


def iterative_refinement(H, z, x, cfg: RefinementConfig = RefinementConfig(),
                         norm2: float | None = None) -> tuple[np.ndarray, dict]:
    """Inverse-iteration refinement of an approximate eigenvector.

    Stops as soon as ``||(H - z I) x|| <= 3 eps ||H - z I||_2`` holds at a
    check point; the check happens before any round and then every ``batch``
    rounds.  Returns the vector and a record with the residual trace.
    """
    H = np.asarray(H, dtype=complex)
    x = np.asarray(x, dtype=complex)
    x = x / np.linalg.norm(x)
    M = _shifted(H, z)
    if norm2 is None:
        norm2 = norm2_estimate(M)
    solver = None

    def solve(v):
        nonlocal solver
        if solver is None:
            solver = _inverse_iteration_solver(H, z)
        return solver(v)

    return refine_loop(lambda v: float(np.linalg.norm(M @ v)), solve, x, cfg, 3.0 * EPS * norm2)


def trailing_ratios(H, z, x) -> np.ndarray:
    """Residual entries divided by the trailing norms ``||x[max(i-1, 0):]||``."""
    M = _shifted(H, z)
    r = M @ x
    tail = np.sqrt(np.cumsum((np.abs(x) ** 2)[::-1])[::-1])
    den = np.empty_like(tail)
    den[0] = tail[0]
    den[1:] = tail[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, np.abs(r) / den, np.where(np.abs(r) > 0, np.inf, 0.0))
    return out


def trailing_accurate_eigenvector(H, z, x, n_rounds: int = 1, raise_on_failure: bool = True):
    """Eigenvector whose residual is small relative to its trailing entries.

    Rows with a too large ratio are repaired from the bottom up by adjusting
    the entry just above the diagonal coupling; if that is not enough, an
    inverse-iteration round is applied and the repair repeated, at most
    ``n_rounds`` times.  Returns ``(x_dot, record)``.
    """
    H = np.asarray(H, dtype=complex)
    m = H.shape[0]
    bound = EPS * float(np.linalg.norm(H))
    x = np.array(x, dtype=complex)
    x /= np.linalg.norm(x)
    achieved = float(np.linalg.norm(trailing_ratios(H, z, x)))
    record = {"initial": achieved, "bound": bound, "rounds": 0, "corrections": 0}
    if achieved <= bound or m == 1:
        record["achieved"] = achieved
        return x, record
    M = _shifted(H, z)
    row_tol = bound / math.sqrt(m)
    solve = None
    best, best_val = x, achieved
    for rnd in range(n_rounds + 1):
        if rnd > 0:
            if solve is None:
                solve = _inverse_iteration_solver(H, z)
            y = solve(x)
            x = y / np.linalg.norm(y)
        xc = x.copy()
        record["corrections"] += int(kern.backward_correct(M, xc, row_tol))
        xc /= np.linalg.norm(xc)
        val = float(np.linalg.norm(trailing_ratios(H, z, xc)))
        record["rounds"] = rnd
        if val < best_val:
            best, best_val = xc, val
        if val <= bound:
            break
    record["achieved"] = best_val
    if best_val > bound and raise_on_failure:
        raise TrailingAccuracyFailed(
            f"trailing accuracy {best_val:.3e} exceeds {bound:.3e}",
            vector=best, achieved=best_val, bound=bound,
        )
    return best, record


def _similarity_from_vector(H, x):
    """Apply the cores reducing ``x`` to ``e_1`` as a similarity (in place)."""
    m = H.shape[0]
    cores, _ = core.reduce_to_e1(x)
    applied = list(reversed(cores))
    for cc in applied:
        i = cc.index
        rows_apply(H, cc, max(i - 1, 0), m)
        cols_apply(H, cc, 0, min(i + 4, m), adjoint=True)
    bulge = float(np.linalg.norm(np.tril(H, -2))) if m > 2 else 0.0
    return applied, bulge


def downdate_eigenvector(H, w, req: DowndateRequest) -> DowndateOutcome:
    """Remove ``req.target_node`` using a refined, trailing-accurate eigenvector.

    Raises :class:`Breakdown` when the refined eigenvector is unusable (its
    residual exceeds the refinement gate) or when the isolated node does not
    decouple.  A trailing-accuracy condition that is missed by a small margin
    is only recorded in the diagnostics.
    """
    H = _check(H)
    m = H.shape[0]
    if m < 2:
        raise ValueError("cannot downdate a 1x1 matrix")
    z = req.target_node
    cfg = req.refinement
    x0 = eigenvector_from_recurrence(H, w, z)
    norm2 = norm2_estimate(_shifted(H, z))
    x1, ir = iterative_refinement(H, z, x0, cfg, norm2=norm2)
    if ir["final_residual"] > cfg.gate * norm2:
        raise Breakdown(
            f"refined eigenvector residual {ir['final_residual']:.3e} exceeds "
            f"{cfg.gate:.1e} * ||H - zI||; the eigenvector is not usable"
        )
    xd, tr = trailing_accurate_eigenvector(H, z, x1, n_rounds=cfg.n_ir, raise_on_failure=False)
    Hw = np.array(H, dtype=complex, order="C")
    applied, bulge = _similarity_from_vector(Hw, xd)
    eps_t = float(abs(Hw[1, 0]))
    thr = _threshold(H)
    if eps_t > thr or not np.isfinite(eps_t):
        raise Breakdown(f"eigenvector deflation residual {eps_t:.3e} exceeds {thr:.3e}")
    diag = {
        "evec_quality": (ir["initial_residual"], ir["final_residual"], ir["bound"]),
        "trailing_accuracy": (tr["initial"], tr["achieved"], tr["bound"]),
        "refinement_rounds": ir["rounds"],
        "bulge": bulge,
        "coupling": _coupling(Hw),
        "met": bool(tr["achieved"] <= tr["bound"]),
    }
    core.zero_below_subdiagonal(Hw)
    return _finish(Hw, applied, _weight_image(m, applied), diag, eps_t)


METHODS = {
    "explicit": downdate_explicit,
    "implicit": downdate_implicit,
}


def downdate(method: str, H, w, req: DowndateRequest, **kw) -> DowndateOutcome:
    """Dispatch on ``method`` in {'explicit', 'implicit', 'eigenvector'}."""
    if method == "eigenvector":
        return downdate_eigenvector(H, w, req, **kw)
    try:
        fn = METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}") from None
    return fn(H, req)
