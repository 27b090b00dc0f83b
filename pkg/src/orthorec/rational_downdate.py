"""Removing a node and a pole from a Hessenberg pencil.

Pole position ``i`` (0-based) is the subdiagonal pair ``(h[i+1, i], k[i+1, i])``.
The implicit method replaces the last pole by the node, swaps it to the top
and deflates.  The eigenvector method reduces a left and a right eigenvector
of ``H - z K`` to ``e_1``.  Both remove the pole at the last position, so a
different pole is first swapped there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import _kernels as kern
from . import core
from .core import CoreTransformation, HessenbergPencil, cols_apply, rows_apply
from .errors import (
    Breakdown,
    DeflationFailed,
    NotProper,
    RecurrenceBreakdown,
    ShiftIsEigenvalue,
    SwapIllConditioned,
)
from .iep import pole_pair
from .poly_downdate import (
    DEFLATION_FACTOR,
    EPS,
    RefinementConfig,
    RQSolver,
    norm2_estimate,
    refine_loop,
)

SWAP_TOL = 1e-13


@dataclass(frozen=True)
class PencilDowndateRequest:
    """Remove ``target_node`` and the pole at ``target_pole_index`` (0-based; ``None`` = last)."""

    target_node: complex
    target_pole_index: int | None = None
    method: str = "implicit"
    refinement: RefinementConfig = field(default_factory=RefinementConfig)

    def __post_init__(self):
        if self.method not in ("implicit", "eigenvector"):
            raise ValueError("method must be 'implicit' or 'eigenvector'")
        object.__setattr__(self, "target_node", complex(self.target_node))


@dataclass
class PencilDowndateOutcome:
    """Reduced pencil plus what is needed to carry a basis along.

    ``left`` holds the left cores in application order (the basis transforms
    as ``q <- q C^H``); ``right`` holds right cores, which do not affect the
    basis.  ``removed_pole`` is the pole that was dropped.
    """

    pencil_reduced: HessenbergPencil
    left: list
    right: list
    deflation_residual: float
    removed_pole: complex
    diagnostics: dict = field(default_factory=dict)
    phase: np.ndarray | None = None

    def propagate(self, q: np.ndarray, row: int | None = None) -> tuple[np.ndarray, int]:
        q = np.array(q, dtype=complex, order="C")
        core.cols_apply_seq(q, self.left, adjoint=True)
        if row is None:
            row = int(np.argmax(np.abs(q[:, 0])))
        keep = np.ones(q.shape[0], dtype=bool)
        keep[row] = False
        qt = np.ascontiguousarray(q[keep, 1:])
        if self.phase is not None:
            qt *= self.phase[None, :]
        return qt, row


# -- elementary moves ---------------------------------------------------------

def _unit(a: complex, b: complex) -> tuple[complex, complex]:
    n = math.hypot(abs(a), abs(b))
    return (a / n, b / n) if n else (0j, 0j)


def _project_pair(P: HessenbergPencil, i: int, direction):
    """Force pole position ``i`` onto the projective ``direction``."""
    dh, dk = direction
    if dh == 0 and dk == 0:
        return
    beta = np.conj(dh) * P.h[i + 1, i] + np.conj(dk) * P.k[i + 1, i]
    P.h[i + 1, i] = beta * dh
    P.k[i + 1, i] = beta * dk


def _same_pole(a, b, tol=SWAP_TOL) -> bool:
    (h1, k1), (h2, k2) = _unit(*a), _unit(*b)
    return abs(h1 * k2 - h2 * k1) <= tol


def _swap_inplace(P: HessenbergPencil, i: int):
    """Swap pole positions ``i`` and ``i + 1`` in place; return ``(L, S)`` or ``(None, None)``.

    ``L`` acts on rows ``i+1, i+2`` from the left and ``S`` on columns
    ``i, i+1`` as ``P <- L P S^H``.
    """
    H, K = P.h, P.k
    m = H.shape[0]
    a11, a12, a22 = H[i + 1, i], H[i + 1, i + 1], H[i + 2, i + 1]
    b11, b12, b22 = K[i + 1, i], K[i + 1, i + 1], K[i + 2, i + 1]
    first, second = _unit(a11, b11), _unit(a22, b22)
    if _same_pole(first, second):
        return None, None
    # null vector of b22 * A - a22 * B, whose (2, 2) entry vanishes
    n11 = b22 * a11 - a22 * b11
    n12 = b22 * a12 - a22 * b12
    x1, x2 = -n12, n11
    if x1 == 0 and x2 == 0:
        return None, None
    S = core.make_core(x1, x2, i)
    cols_apply(H, S, 0, i + 3, adjoint=True)
    cols_apply(K, S, 0, i + 3, adjoint=True)
    ya, yb = (H[i + 1, i], H[i + 2, i]), (K[i + 1, i], K[i + 2, i])
    y = ya if math.hypot(abs(ya[0]), abs(ya[1])) >= math.hypot(abs(yb[0]), abs(yb[1])) else yb
    L = core.make_core(y[0], y[1], i + 1)
    rows_apply(H, L, i, m)
    rows_apply(K, L, i, m)
    H[i + 2, i] = 0
    K[i + 2, i] = 0
    _project_pair(P, i, second)
    _project_pair(P, i + 1, first)
    return L, S


def pole_swap(P: HessenbergPencil, i: int):
    """Swap the poles at positions ``i`` and ``i + 1`` (0-based).

    Returns ``(P', L, S)`` with ``P' = L P S^H``; ``L`` acts on rows
    ``(i+1, i+2)`` and ``S`` on columns ``(i, i+1)``.  Numerically equal
    poles give identity cores.
    """
    m = P.m
    if not 0 <= i <= m - 3:
        raise core.IndexOutOfRange(f"pole position {i} cannot be swapped in dimension {m}")
    Q = P.copy()
    L, S = _swap_inplace(Q, i)
    if L is None:
        return Q, CoreTransformation(i + 1, 1.0, 0j), CoreTransformation(i, 1.0, 0j)
    return Q, L, S


def _pencil_pair(xi):
    return pole_pair(xi)


def _change_last_inplace(P: HessenbergPencil, xi) -> CoreTransformation:
    """Right rotation on the last two columns giving the last position pole ``xi``."""
    H, K = P.h, P.k
    m = H.shape[0]
    hh, kk = _pencil_pair(xi)
    x1 = kk * H[m - 1, m - 2] - hh * K[m - 1, m - 2]
    x2 = kk * H[m - 1, m - 1] - hh * K[m - 1, m - 1]
    S = core.make_row_core(x1, x2, m - 2)
    cols_apply(H, S, adjoint=True)
    cols_apply(K, S, adjoint=True)
    _project_pair(P, m - 2, (hh, kk))
    return S


def _change_first_inplace(P: HessenbergPencil, xi) -> CoreTransformation:
    """Left rotation on the first two rows giving the first position pole ``xi``."""
    H, K = P.h, P.k
    hh, kk = _pencil_pair(xi)
    y0 = kk * H[0, 0] - hh * K[0, 0]
    y1 = kk * H[1, 0] - hh * K[1, 0]
    if y0 == 0 and y1 == 0:
        raise ShiftIsEigenvalue("first columns are parallel to the requested pole")
    L = core.make_core(y0, y1, 0)
    rows_apply(H, L)
    rows_apply(K, L)
    _project_pair(P, 0, (hh, kk))
    return L


def _check_shift(P: HessenbergPencil, xi):
    hh, kk = _pencil_pair(xi)
    M = kk * P.h - hh * P.k
    sv = sla.svdvals(M)
    if sv[-1] <= P.m * EPS * max(sv[0], 1e-300):
        raise ShiftIsEigenvalue("the requested pole is an eigenvalue of the pencil")


def change_last_pole(P: HessenbergPencil, xi):
    """Replace the pole at the last position by ``xi``; returns ``(P', S)`` with ``P' = P S^H``."""
    if P.m < 2:
        raise core.IndexOutOfRange("a 1x1 pencil has no pole positions")
    _check_shift(P, xi)
    Q = P.copy()
    return Q, _change_last_inplace(Q, xi)


def change_first_pole(P: HessenbergPencil, xi):
    """Replace the pole at position 0 by ``xi``; returns ``(P', L)`` with ``P' = L P``."""
    if P.m < 2:
        raise core.IndexOutOfRange("a 1x1 pencil has no pole positions")
    _check_shift(P, xi)
    Q = P.copy()
    return Q, _change_first_inplace(Q, xi)


# -- shared pieces ------------------------------------------------------------

def _validated(P: HessenbergPencil, req: PencilDowndateRequest):
    if not isinstance(P, HessenbergPencil):
        P = HessenbergPencil(*P)
    m = P.m
    if m < 2:
        raise ValueError("cannot downdate a 1x1 pencil")
    if not core.is_proper_pencil(P):
        raise NotProper("downdating needs a proper Hessenberg pencil")
    t = m - 2 if req.target_pole_index is None else int(req.target_pole_index)
    if not 0 <= t <= m - 2:
        raise core.IndexOutOfRange(f"pole index {t} out of range for {m - 1} poles")
    return P.copy(), t


def _move_pole_last(P: HessenbergPencil, t: int, left: list):
    for p in range(t, P.m - 2):
        L, _ = _swap_inplace(P, p)
        if L is not None:
            left.append(L)


def _threshold(P: HessenbergPencil) -> tuple[float, float]:
    return (DEFLATION_FACTOR * EPS * float(np.linalg.norm(P.h)),
            DEFLATION_FACTOR * EPS * float(np.linalg.norm(P.k)))


def _weight_image(m, cores):
    v = np.zeros((m, 1), dtype=complex)
    v[0, 0] = 1.0
    core.rows_apply_seq(v, cores)
    return v[:, 0]


def _finish(P: HessenbergPencil, left, right, removed, diag, residual):
    m = P.m
    Ht = np.ascontiguousarray(P.h[1:, 1:])
    Kt = np.ascontiguousarray(P.k[1:, 1:])
    core.zero_below_subdiagonal(Ht)
    core.zero_below_subdiagonal(Kt)
    v = _weight_image(m, left)
    phase = np.ones(m - 1, dtype=complex)
    if abs(v[1]):
        phase[0] = v[1] / abs(v[1])
    Ht[0, :] *= np.conj(phase[0])
    Kt[0, :] *= np.conj(phase[0])
    diag["weight_tail"] = float(np.linalg.norm(v[2:])) if m > 2 else 0.0
    out = HessenbergPencil(Ht, Kt, _checked=True)
    return PencilDowndateOutcome(out, left, right, residual, removed, diag, phase)


def _first_coupling(P: HessenbergPencil) -> float:
    return float(max(np.linalg.norm(P.h[0, 1:]), np.linalg.norm(P.k[0, 1:])))


# -- implicit -----------------------------------------------------------------

def downdate_implicit_rqz(P: HessenbergPencil, w, req: PencilDowndateRequest) -> PencilDowndateOutcome:
    """Remove ``req.target_node`` with one implicit RQZ sweep.

    The pole to drop is swapped to the last position and replaced by the
    node; the node is then swapped up to position 0, where the first columns
    of ``H`` and ``K`` become parallel and one rotation of rows 0 and 1
    decouples it.
    """
    P, t = _validated(P, req)
    m = P.m
    z = req.target_node
    removed = P.poles()[t]
    thr_h, thr_k = _threshold(P)
    left, right = [], []
    _move_pole_last(P, t, left)
    right.append(_change_last_inplace(P, z))
    for p in range(m - 3, -1, -1):
        L, S = _swap_inplace(P, p)
        if L is not None:
            left.append(L)
            right.append(S)
    H, K = P.h, P.k
    ch, ck = (H[0, 0], H[1, 0]), (K[0, 0], K[1, 0])
    y = ch if math.hypot(abs(ch[0]), abs(ch[1])) >= math.hypot(abs(ck[0]), abs(ck[1])) else ck
    R1 = core.make_core(y[0], y[1], 0)
    rows_apply(H, R1)
    rows_apply(K, R1)
    left.append(R1)
    eh, ek = float(abs(H[1, 0])), float(abs(K[1, 0]))
    if eh > thr_h or ek > thr_k:
        raise DeflationFailed(
            f"pencil deflation residuals ({eh:.3e}, {ek:.3e}) exceed ({thr_h:.3e}, {thr_k:.3e})",
            residual=max(eh, ek),
        )
    diag = {"residual_h": eh, "residual_k": ek, "coupling": _first_coupling(P)}
    return _finish(P, left, right, removed, diag, max(eh, ek))


# -- eigenvector method -------------------------------------------------------

def _pencil_shift(P: HessenbergPencil, z) -> np.ndarray:
    return np.ascontiguousarray(P.h - z * P.k)


def left_ratios(M, r) -> np.ndarray:
    """Entries of ``r^H M`` divided by the trailing norms ``||r[max(i-1, 0):]||``."""
    rho = np.abs(np.conj(r) @ M)
    return _ratio(rho, r)


def right_ratios(Mt, s) -> np.ndarray:
    return _ratio(np.abs(Mt @ s), s)


def _ratio(res, v):
    tail = np.sqrt(np.cumsum((np.abs(v) ** 2)[::-1])[::-1])
    den = np.empty_like(tail)
    den[0] = tail[0]
    den[1:] = tail[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, res / den, np.where(res > 0, np.inf, 0.0))


def left_eigenvector_from_orf(P: HessenbergPencil, w, z, cfg: RefinementConfig = RefinementConfig(),
                              norm2: float | None = None):
    """Left eigenvector from the recurrence of the rational functions at ``z``.

    Returns ``(r, record)``; ``r`` has unit norm and is refined by inverse
    iteration when ``||r^H (H - z K)||`` misses ``3 eps ||H - z K||_2``.
    """
    M = _pencil_shift(P, z)
    m = M.shape[0]
    if m == 1:
        return np.ones(1, dtype=complex), {"initial_residual": 0.0, "final_residual": 0.0,
                                           "bound": 0.0, "rounds": 0, "met": True}
    if np.any(np.diagonal(M, -1) == 0):
        raise RecurrenceBreakdown("a pole coincides with the evaluation point")
    u = kern.forward_recurrence(M)
    if not np.all(np.isfinite(u)):
        raise RecurrenceBreakdown("recurrence overflowed")
    r = np.conj(u) / np.linalg.norm(u)
    if norm2 is None:
        norm2 = norm2_estimate(M)
    solver = None

    def solve(v):
        nonlocal solver
        if solver is None:
            solver = RQSolver(M, EPS * float(np.linalg.norm(M)))
        return solver.solve_adjoint(v)

    return refine_loop(lambda v: float(np.linalg.norm(np.conj(v) @ M)), solve, r, cfg, 3.0 * EPS * norm2)


def right_eigenvector(M, z=None, cfg: RefinementConfig = RefinementConfig(), start=None,
                      norm2: float | None = None):
    """Right null vector of a Hessenberg ``M = H - z K`` by inverse iteration.

    ``M`` may also be given as a pencil together with ``z``.  Starts from
    ``start`` (or a fixed vector) and always performs at least one round.
    Returns ``(s, record)``.
    """
    if isinstance(M, HessenbergPencil):
        M = _pencil_shift(M, z)
    M = np.ascontiguousarray(M, dtype=complex)
    m = M.shape[0]
    if m == 1:
        return np.ones(1, dtype=complex), {"initial_residual": 0.0, "final_residual": 0.0,
                                           "bound": 0.0, "rounds": 0, "met": True}
    if norm2 is None:
        norm2 = norm2_estimate(M)
    solver = RQSolver(M, EPS * float(np.linalg.norm(M)))
    s = np.ones(m, dtype=complex) if start is None else np.array(start, dtype=complex)
    s = s / np.linalg.norm(s)
    s = solver.solve(s)
    s /= np.linalg.norm(s)
    return refine_loop(lambda v: float(np.linalg.norm(M @ v)), solver.solve, s, cfg, 3.0 * EPS * norm2)


def _trailing_left(M, r, tol, bound, transfer=None):
    """Left vector of ``M`` accurate in its trailing entries.

    Forward correction of ``r`` reaches the trailing entries only through
    cancellation.  When ``transfer`` is given (``K s`` or ``H s`` for a
    trailing-accurate right vector ``s``) it is taken instead: its entries
    inherit the relative accuracy of the trailing part of ``s``.
    """
    before = float(np.linalg.norm(left_ratios(M, r)))
    fixes = 0
    v = None
    if transfer is not None:
        nv = np.linalg.norm(transfer)
        if np.isfinite(nv) and nv > 0:
            v = transfer / nv
            ph = np.vdot(v, r)
            if ph != 0:
                v = v * (ph / abs(ph))
    if v is None:
        u = np.conj(r).copy()
        fixes = int(kern.forward_correct(M, u, tol))
        v = np.conj(u) / np.linalg.norm(u)
    after = float(np.linalg.norm(left_ratios(M, v)))
    return v, {"initial": before, "achieved": after, "bound": bound, "corrections": fixes}


def _apply_left_to_vector(cores, v):
    vv = np.array(v, dtype=complex).reshape(-1, 1)
    core.rows_apply_seq(vv, cores)
    return vv[:, 0]


def downdate_eigenvector_pencil(P: HessenbergPencil, w, req: PencilDowndateRequest) -> PencilDowndateOutcome:
    """Remove ``req.target_node`` through a left and a right eigenvector.

    The left eigenvector comes from the rational recurrence and is refined.
    The right eigenvector of ``H - z K`` (equivalently of the left-transformed
    pencil) is found by inverse iteration started from ``K^{-1} r`` and made
    accurate in its trailing entries by backward correction.  Because
    ``H K^{-1}`` is normal for a solution of the inverse problem, ``K s`` is a
    left eigenvector too and inherits the trailing accuracy of ``s``.  Both vectors are reduced to ``e_1`` by cores,
    applied from the left and the right respectively.  Breakdown is reported when a refined
    eigenvector misses the refinement gate or the node does not decouple.
    """
    P, t = _validated(P, req)
    m = P.m
    z = req.target_node
    cfg = req.refinement
    removed = P.poles()[t]
    left, right = [], []
    _move_pole_last(P, t, left)
    M = _pencil_shift(P, z)
    norm2 = norm2_estimate(M)
    bound = EPS * min(float(np.linalg.norm(P.h)), float(np.linalg.norm(P.k)))
    row_tol = bound / math.sqrt(m)

    r, lq = left_eigenvector_from_orf(P, w, z, cfg, norm2=norm2)
    if lq["final_residual"] > cfg.gate * norm2:
        raise Breakdown(f"left eigenvector residual {lq['final_residual']:.3e} exceeds the gate")
    try:
        start = sla.solve(P.k, r, check_finite=False)
        if not np.all(np.isfinite(start)):
            start = None
    except (sla.LinAlgError, ValueError):
        start = None
    s, rq = right_eigenvector(M, cfg=cfg, start=start, norm2=norm2)
    if rq["final_residual"] > cfg.gate * norm2:
        raise Breakdown(f"right eigenvector residual {rq['final_residual']:.3e} exceeds the gate")
    sd = s.copy()
    fixes = int(kern.backward_correct(M, sd, row_tol))
    sd /= np.linalg.norm(sd)

    def transferred(v):
        # H K^{-1} is normal, so K v and H v are left eigenvectors as well
        kv, hv = P.k @ v, P.h @ v
        return _trailing_left(M, r, row_tol, bound, kv if np.linalg.norm(kv) >= np.linalg.norm(hv) else hv)

    def trial(lv, rv):
        H, K = P.h.copy(), P.k.copy()
        lc = core.reduce_to_e1(lv)[0][::-1]
        rc = core.reduce_to_e1(rv)[0][::-1]
        for cc in lc:
            lo = max(cc.index - 1, 0)
            rows_apply(H, cc, lo, m)
            rows_apply(K, cc, lo, m)
        for cc in rc:
            cols_apply(H, cc, adjoint=True)
            cols_apply(K, cc, adjoint=True)
        return H, K, lc, rc

    # the corrected right vector is usually better; keep whichever pair decouples more cleanly
    best = None
    for v in (sd, s):
        rv_left, lt_v = transferred(v)
        H, K, lc, rc = trial(rv_left, v)
        res = max(float(np.linalg.norm(H[1:, 0])), float(np.linalg.norm(K[1:, 0])))
        if best is None or res < best[0]:
            best = (res, v, lt_v, H, K, lc, rc)
    _, chosen, lt, H, K, lapplied, rapplied = best
    Mt_s_before = _apply_left_to_vector(lapplied, M @ s)
    Mt_s_after = _apply_left_to_vector(lapplied, M @ chosen)
    rt_before = float(np.linalg.norm(_ratio(np.abs(Mt_s_before), s)))
    rt_after = float(np.linalg.norm(_ratio(np.abs(Mt_s_after), chosen)))
    P.h[:], P.k[:] = H, K
    H, K = P.h, P.k
    left.extend(lapplied)
    right.extend(rapplied)

    bulge = float(max(np.linalg.norm(np.tril(H, -2)), np.linalg.norm(np.tril(K, -2)))) if m > 2 else 0.0
    eh = float(np.linalg.norm(H[1:, 0]))
    ek = float(np.linalg.norm(K[1:, 0]))
    thr_h, thr_k = _threshold(P)
    if not (np.isfinite(eh) and np.isfinite(ek)) or eh > thr_h or ek > thr_k:
        raise Breakdown(f"pencil eigenvector deflation residuals ({eh:.3e}, {ek:.3e}) too large")
    H[1:, 0] = 0
    K[1:, 0] = 0
    diag = {
        "left_quality": (lq["initial_residual"], lq["final_residual"], lq["bound"]),
        "left_trailing": (lt["initial"], lt["achieved"], bound),
        "right_quality": (rq["initial_residual"], rq["final_residual"], rq["bound"]),
        "right_trailing": (rt_before, rt_after, bound),
        "refinement_rounds": (lq["rounds"], rq["rounds"]),
        "corrections": (lt["corrections"], fixes),
        "bulge": bulge,
        "coupling": _first_coupling(P),
        "residual_h": eh,
        "residual_k": ek,
    }
    return _finish(P, left, right, removed, diag, max(eh, ek))


def downdate_pencil(P: HessenbergPencil, w, req: PencilDowndateRequest) -> PencilDowndateOutcome:
    if req.method == "implicit":
        return downdate_implicit_rqz(P, w, req)
    return downdate_eigenvector_pencil(P, w, req)


__all__ = [
    "PencilDowndateRequest",
    "PencilDowndateOutcome",
    "pole_swap",
    "change_last_pole",
    "change_first_pole",
    "downdate_implicit_rqz",
    "left_eigenvector_from_orf",
    "right_eigenvector",
    "downdate_eigenvector_pencil",
    "downdate_pencil",
    "SwapIllConditioned",
]
