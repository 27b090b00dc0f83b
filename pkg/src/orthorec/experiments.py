"""Experiment definitions: node orders, initial solutions and step drivers.

Every experiment is a set of independent cells, one per downdating method.
A cell starts from the same initial solution, runs its downdates (or window
slides) and reports a :class:`~orthorec.metrics.MetricReport` per recorded
step.  A breakdown ends the cell; results up to that step are kept.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from . import __version__, core
from .errors import Breakdown, ConfigInvalid
from .iep import HiepSolution, InnerProductSpec, solve_hiep, solve_hpiep
from .least_squares import MATRIX_METHODS, WindowState, lsq_fit, slide_window, sup_error
from .metrics import MetricReport, beyond_tridiagonal, report_solution, unitarity_defect
from .poly_downdate import RefinementConfig

EXPERIMENTS = (
    "unit_circle_poly",
    "chebyshev",
    "equidistant",
    "unit_circle_rational",
    "real_line_window",
    "sliding_lsq",
)
POLY_EXPERIMENTS = ("unit_circle_poly", "chebyshev", "equidistant")
ALL_METHODS = ("explicit1", "implicit1", "implicit2", "eigenvector")
RATIONAL_METHODS = ("implicit1", "eigenvector")
ORDERS = ("balanced", "unbalanced", "paper_sequence")

# dimensions of the approximation spaces in the sliding least squares run
POLY_DIM = 65
RATIONAL_DIM = 25


# -- node orders --------------------------------------------------------------

def balanced_circle_order(m: int) -> list[int]:
    """Order of the angles ``2 pi j / m`` (returned as ``j``, 0-based).

    Starts at angle 0 and always takes the free angle farthest from the chosen
    ones, i.e. the midpoint of a largest gap.  Ties are broken by comparing the
    sorted distance profiles to all chosen angles lexicographically, then by
    the smallest angle; for ``m = 2^p`` this is the bit-reversal order.
    """
    if m < 1:
        raise ValueError("m must be positive")
    idx = np.arange(m)
    chosen = [0]
    free = np.ones(m, dtype=bool)
    free[0] = False
    nearest = np.minimum(idx, m - idx)
    while len(chosen) < m:
        d = np.where(free, nearest, -1)
        cands = np.flatnonzero(d == d.max())
        if len(cands) > 1:
            c = np.asarray(chosen)
            D = np.abs(cands[:, None] - c[None, :])
            D = np.sort(np.minimum(D, m - D), axis=1)
            # lexsort keys: last one is primary; ties keep ascending candidate order
            order = np.lexsort([cands] + [-D[:, j] for j in range(D.shape[1] - 1, -1, -1)])
            pick = int(cands[order[0]])
        else:
            pick = int(cands[0])
        chosen.append(pick)
        free[pick] = False
        dist = np.abs(idx - pick)
        nearest = np.minimum(nearest, np.minimum(dist, m - dist))
    return chosen


def half_circle_order(m: int) -> list[int]:
    """Balanced order of the angles ``pi (j + 1/2) / m``, ``j < m``, on the upper half circle.

    The angles are half of ``2 m`` equidistant angles on the full circle;
    their balanced order is restricted to the upper half.
    """
    return [j for j in balanced_circle_order(2 * m) if j < m]


def equidistant_downdate_order(m: int) -> list[int]:
    """Indices (0-based) of the even-numbered nodes, alternating from both ends.

    In 1-based numbering this is ``2, m, 4, m - 2, ...``.
    """
    even = list(range(2, m + 1, 2))
    out = []
    lo, hi = 0, len(even) - 1
    take_low = True
    while lo <= hi:
        if take_low:
            out.append(even[lo])
            lo += 1
        else:
            out.append(even[hi])
            hi -= 1
        take_low = not take_low
    return [i - 1 for i in out]


# -- configuration ---------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """One experiment run.  ``None`` fields take the experiment's default.

    ``metrics_every`` controls how often per-step metrics are evaluated
    (``1``: every step, ``0``: only the first and last step).  For
    ``sliding_lsq`` the first entry of ``methods`` drives the polynomial
    window and the second the rational one.
    """

    experiment: str
    m: int | None = None
    order: str | None = None
    methods: list[str] | None = None
    n_ir: int | None = None
    b: int | None = None
    delta: float | None = None
    alpha: float | None = None
    ell: int | None = None
    seed: int = 0
    interval: list[float] | None = None
    metrics_every: int = 1
    gate: float | None = None
    output_dir: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigInvalid(f"unknown experiment {self.experiment!r}")
        d = _DEFAULTS[self.experiment]
        for k, v in d.items():
            if getattr(self, k) is None:
                setattr(self, k, v)
        self.methods = list(self.methods)
        self._validate()

    def _validate(self):
        e = self.experiment
        if not isinstance(self.m, int) or self.m < 2:
            raise ConfigInvalid("m must be an integer >= 2")
        if self.order not in ORDERS:
            raise ConfigInvalid(f"order must be one of {ORDERS}")
        allowed = ALL_METHODS if e in POLY_EXPERIMENTS else RATIONAL_METHODS
        if e == "sliding_lsq":
            if len(self.methods) != 2 or self.methods[0] not in ALL_METHODS \
                    or self.methods[1] not in RATIONAL_METHODS:
                raise ConfigInvalid("sliding_lsq needs [polynomial method, rational method]")
        elif not self.methods or any(mm not in allowed for mm in self.methods):
            raise ConfigInvalid(f"methods must be a non-empty subset of {allowed}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigInvalid("methods must not repeat")
        for name in ("n_ir", "b", "ell", "metrics_every"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ConfigInvalid(f"{name} must be a non-negative integer")
        if self.gate is not None and not (isinstance(self.gate, (int, float)) and self.gate > 0):
            raise ConfigInvalid("gate must be a positive number")
        if self.b < 1:
            raise ConfigInvalid("b must be at least 1")
        if not 0 < self.delta < 1:
            raise ConfigInvalid("delta must lie in (0, 1)")
        if not self.alpha > 0:
            raise ConfigInvalid("alpha must be positive")
        if self.interval is not None:
            if len(self.interval) != 2 or not self.interval[0] < self.interval[1]:
                raise ConfigInvalid("interval must be [a, b] with a < b")
        if e == "unit_circle_rational" and self.m % 2 == 0:
            raise ConfigInvalid("unit_circle_rational needs odd m (poles come in pairs)")
        if e == "sliding_lsq" and self.m < POLY_DIM:
            raise ConfigInvalid(f"sliding_lsq needs m >= {POLY_DIM}")
        if e == "sliding_lsq" and (2 * self.alpha != int(2 * self.alpha) or self.alpha > 6):
            raise ConfigInvalid("sliding_lsq needs alpha in {1/2, 1, 3/2, ..., 6}")
        limit = self.m - 1 if e in POLY_EXPERIMENTS or e == "unit_circle_rational" else None
        if limit is not None and self.ell > limit:
            raise ConfigInvalid(f"at most {limit} downdates are possible")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigInvalid("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigInvalid(f"unknown config fields: {sorted(unknown)}")
        if "experiment" not in d:
            raise ConfigInvalid("config needs an 'experiment' field")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from None

    def refinement(self) -> RefinementConfig:
        if self.gate is None:
            return RefinementConfig(n_ir=self.n_ir, batch=self.b)
        return RefinementConfig(n_ir=self.n_ir, batch=self.b, gate=self.gate)

    def to_dict(self) -> dict:
        return asdict(self)


_COMMON = {"delta": 0.1, "alpha": 1.0, "n_ir": 1, "b": 1}
_DEFAULTS = {
    "unit_circle_poly": {**_COMMON, "m": 500, "order": "balanced", "methods": list(ALL_METHODS), "ell": 250},
    "chebyshev": {**_COMMON, "m": 500, "order": "balanced", "methods": list(ALL_METHODS), "ell": 250},
    "equidistant": {**_COMMON, "m": 250, "order": "paper_sequence", "methods": list(ALL_METHODS),
                    "ell": 125, "n_ir": 10, "b": 5},
    "unit_circle_rational": {**_COMMON, "m": 201, "order": "balanced", "methods": list(RATIONAL_METHODS),
                             "ell": 100},
    "real_line_window": {**_COMMON, "m": 201, "order": "paper_sequence",
                         "methods": list(RATIONAL_METHODS), "ell": 100},
    "sliding_lsq": {**_COMMON, "m": 201, "order": "paper_sequence", "methods": ["eigenvector", "implicit1"],
                    "ell": 100},
}
_DEFAULT_INTERVAL = {"real_line_window": [0.0, 2 * math.pi]}


# -- results ---------------------------------------------------------------------

@dataclass
class CellResult:
    """Per-step reports of one method, plus breakdown information."""

    name: str
    reports: list[MetricReport] = field(default_factory=list)
    conditions: list[dict] = field(default_factory=list)
    breakdown: dict | None = None
    golden: dict = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.breakdown is None


@dataclass
class RunManifest:
    config: dict
    version: str
    eps: float
    wall_time: float
    golden: dict
    events: list

    @property
    def status(self) -> str:
        return "partial" if self.events else "clean"

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "version": self.version,
            "eps": self.eps,
            "wall_time": self.wall_time,
            "status": self.status,
            "golden": self.golden,
            "events": self.events,
        }


# -- initial solutions -----------------------------------------------------------

def unit_circle_setup(m: int) -> tuple[HiepSolution, list[int]]:
    """Nodes in balanced order on the unit circle; downdates remove the last one."""
    order = balanced_circle_order(m)
    z = np.exp(2j * np.pi * np.array(order) / m)
    sol = solve_hiep(InnerProductSpec(z, np.full(m, 1 / math.sqrt(m))))
    return sol, list(range(m - 1, -1, -1))


def chebyshev_solution(m: int) -> HiepSolution:
    """Closed-form recurrence and basis for Chebyshev nodes with unit weights."""
    theta = np.pi * (np.arange(m) + 0.5) / m
    z = np.cos(theta)
    H = np.zeros((m, m), dtype=complex)
    off = np.full(m - 1, 0.5)
    off[0] = 1 / math.sqrt(2)
    H[np.arange(1, m), np.arange(m - 1)] = off
    H[np.arange(m - 1), np.arange(1, m)] = off
    Q = np.sqrt(2.0 / m) * np.cos(np.outer(theta, np.arange(m)))
    Q[:, 0] = 1 / math.sqrt(m)
    return HiepSolution(Q.astype(complex), H, z.astype(complex), np.ones(m, dtype=complex))


def chebyshev_order(m: int, order: str) -> list[int]:
    if order == "balanced":
        return half_circle_order(m)[::-1]
    return list(range(m))


def equidistant_setup(m: int) -> HiepSolution:
    z = np.arange(1, m + 1) / m
    return solve_hiep(InnerProductSpec(z, np.full(m, 1 / math.sqrt(m))))


def circle_pole_pairs(m: int, delta: float) -> np.ndarray:
    """Pole pairs on radii ``1 - delta`` and ``1 + delta`` at the node angles in balanced order."""
    order = balanced_circle_order(m)[: (m - 1) // 2]
    out = []
    for j in order:
        u = np.exp(2j * np.pi * j / m)
        out.extend([(1 - delta) * u, (1 + delta) * u])
    return np.array(out)


def unit_circle_rational_setup(m: int, delta: float):
    order = balanced_circle_order(m)
    z = np.exp(2j * np.pi * np.array(order) / m)
    return solve_hpiep(InnerProductSpec(z, np.full(m, 1 / math.sqrt(m))), circle_pole_pairs(m, delta),
                       method="update")


def real_line_pole(j: int, a: float, dx: float, delta: float) -> complex:
    """Pole ``j`` (1-based) of the real-line window."""
    if j % 2:
        return complex(a + (j - 0.5) * dx, delta)
    return complex(a + (j - 1.5) * dx, -delta)


def real_line_setup(m: int, a: float, b: float, delta: float):
    dx = (b - a) / (m - 1)
    x = a + dx * np.arange(m)
    poles = [real_line_pole(j, a, dx, delta) for j in range(1, m)]
    return solve_hpiep(InnerProductSpec(x, np.ones(m)), poles, method="update"), dx


def lsq_function(x):
    return 1.0 / (np.cos(x) ** 2 + 1.0)


def singularity(j: int) -> complex:
    """Singularity ``j`` of :func:`lsq_function`; ``2p`` and ``2p + 1`` form a conjugate pair."""
    base = complex(np.arccos(1j + 0j)) + (j // 2) * np.pi
    return base if j % 2 == 0 else base.conjugate()


def sliding_poles(alpha: float, m: int) -> tuple[list[complex], int]:
    """Initial poles for the rational window and the index of the next singularity."""
    last = int(2 * alpha + 5)
    finite = [singularity(j) for j in range(-6, last + 1)]
    poles = finite + [np.inf] * (m - 1 - len(finite))
    return poles, last + 1


# -- drivers ---------------------------------------------------------------------

def _record(cfg: ExperimentConfig, k: int, last: int) -> bool:
    if k == 0 or k == last:
        return True
    return cfg.metrics_every > 0 and k % cfg.metrics_every == 0


_CONDITION_KEYS = ("evec_quality", "trailing_accuracy", "left_quality", "left_trailing",
                   "right_quality", "right_trailing")


def _conditions(k: int, diag: dict) -> dict | None:
    row = {}
    for key in _CONDITION_KEYS:
        if key in diag:
            init, achieved, bound = diag[key]
            row[f"{key}_initial"] = init
            row[f"{key}_achieved"] = achieved
            row[f"{key}_bound"] = bound
    return {"k": k, **row} if row else None


def _downdate_cell(cfg: ExperimentConfig, name: str, sol, targets: list, pole_index=None,
                   progress: Callable | None = None) -> CellResult:
    """Remove ``targets`` (node values) one by one."""
    cell = CellResult(name)
    method = name
    state = WindowState(sol, method, cfg.refinement())
    n_steps = min(cfg.ell, len(targets))
    cell.reports.append(report_solution(0, state.sol))
    for k in range(1, n_steps + 1):
        idx = int(np.flatnonzero(state.nodes == targets[k - 1])[0])
        try:
            diag = state.downdate(idx, pole_index)
        except Breakdown as exc:
            cell.breakdown = {"method": name, "k": k, "error": type(exc).__name__, "message": str(exc)}
            break
        cond = _conditions(k, diag)
        if cond is not None:
            cell.conditions.append(cond)
        if _record(cfg, k, n_steps):
            cell.reports.append(report_solution(k, state.sol))
        if progress:
            progress(name, k)
    cell.golden = _final_golden(state)
    return cell


def _final_golden(state: WindowState) -> dict:
    if state.is_pencil:
        return {}
    H = state.sol.h
    return {"unitarity": unitarity_defect(H), "beyond_tridiagonal": beyond_tridiagonal(H)}


def _window_cell(cfg: ExperimentConfig, name: str, sol, next_nodes, next_poles,
                 drop_pole_index, progress=None) -> CellResult:
    cell = CellResult(name)
    state = WindowState(sol, name, cfg.refinement())
    cell.reports.append(report_solution(0, state.sol))
    for k in range(1, cfg.ell + 1):
        nodes = next_nodes(k)
        try:
            slide_window(state, nodes, [1.0] * len(nodes), next_poles(k), drop_count=2,
                         drop_pole_index=drop_pole_index)
        except Breakdown as exc:
            cell.breakdown = {"method": name, "k": k, "error": type(exc).__name__, "message": str(exc)}
            break
        for d in state.diagnostics[-2:]:
            cond = _conditions(k, d)
            if cond is not None:
                cell.conditions.append(cond)
        if _record(cfg, k, cfg.ell):
            cell.reports.append(report_solution(k, state.sol))
        if progress:
            progress(name, k)
    return cell


def _lsq_cell(cfg: ExperimentConfig, name: str, rational: bool, progress=None) -> CellResult:
    m, alpha = cfg.m, cfg.alpha
    a, b = 0.0, alpha * math.pi
    dx = (b - a) / (m - 1)
    x = a + dx * np.arange(m)
    spec = InnerProductSpec(x, np.ones(m))
    method = name.split(":", 1)[1]
    if rational:
        poles, next_j = sliding_poles(alpha, m)
        n_finite = sum(1 for p in poles if np.isfinite(p))
        sol = solve_hpiep(spec, poles, method="update")
        dim = RATIONAL_DIM
    else:
        sol, dim = solve_hiep(spec), POLY_DIM
    state = WindowState(sol, method, cfg.refinement())
    cell = CellResult(name)

    def measure(k):
        s = state.sol
        model = lsq_fit(s, lsq_function(s.nodes.real), dim)
        rep = report_solution(k, s)
        rep.err_f = sup_error(lsq_function, model, (s.nodes[0].real, s.nodes[-1].real), m)
        return rep

    cell.reports.append(measure(0))
    for k in range(1, cfg.ell + 1):
        nodes = state.sol.nodes.real
        last = nodes[-1]
        new_nodes = [last + dx, last + 2 * dx]
        new_poles = None
        drop_pole = None
        dest = None
        if rational:
            lo, hi = nodes[0], nodes[2]
            finite = [p for p in state.sol.poles if np.isfinite(p)]
            if any(lo <= p.real < hi for p in finite):
                new_poles = [singularity(next_j), singularity(next_j + 1)]
                next_j += 2
                drop_pole = 0
                dest = [n_finite - 2, n_finite - 1]
            else:
                new_poles = [np.inf, np.inf]
        try:
            slide_window(state, new_nodes, [1.0, 1.0], new_poles, drop_count=2,
                         drop_pole_index=drop_pole, pole_destinations=dest)
        except Breakdown as exc:
            cell.breakdown = {"method": name, "k": k, "error": type(exc).__name__, "message": str(exc)}
            break
        for d in state.diagnostics[-2:]:
            cond = _conditions(k, d)
            if cond is not None:
                cell.conditions.append(cond)
        if _record(cfg, k, cfg.ell):
            cell.reports.append(measure(k))
        if progress:
            progress(name, k)
    return cell


def run_cells(cfg: ExperimentConfig, progress: Callable | None = None) -> list[CellResult]:
    e = cfg.experiment
    cells = []
    if e == "unit_circle_poly":
        sol, idx = unit_circle_setup(cfg.m)
        targets = [sol.nodes[i] for i in idx]
        cells = [_downdate_cell(cfg, mm, sol, targets, progress=progress) for mm in cfg.methods]
    elif e == "chebyshev":
        sol = chebyshev_solution(cfg.m)
        targets = [sol.nodes[i] for i in chebyshev_order(cfg.m, cfg.order)]
        cells = [_downdate_cell(cfg, mm, sol, targets, progress=progress) for mm in cfg.methods]
    elif e == "equidistant":
        sol = equidistant_setup(cfg.m)
        targets = [sol.nodes[i] for i in equidistant_downdate_order(cfg.m)]
        cells = [_downdate_cell(cfg, mm, sol, targets, progress=progress) for mm in cfg.methods]
    elif e == "unit_circle_rational":
        sol = unit_circle_rational_setup(cfg.m, cfg.delta)
        targets = list(sol.nodes[::-1])
        cells = [_downdate_cell(cfg, mm, sol, targets, progress=progress) for mm in cfg.methods]
    elif e == "real_line_window":
        a, b = cfg.interval or _DEFAULT_INTERVAL[e]
        sol, dx = real_line_setup(cfg.m, a, b, cfg.delta)
        m = cfg.m

        def nodes(k):
            return [b + (2 * k - 1) * dx, b + 2 * k * dx]

        def poles(k):
            j = m + 2 * (k - 1)
            return [real_line_pole(j, a, dx, cfg.delta), real_line_pole(j + 1, a, dx, cfg.delta)]

        cells = [_window_cell(cfg, mm, sol, nodes, poles, 0, progress) for mm in cfg.methods]
    elif e == "sliding_lsq":
        cells = [
            _lsq_cell(cfg, f"polynomial:{cfg.methods[0]}", False, progress),
            _lsq_cell(cfg, f"rational:{cfg.methods[1]}", True, progress),
        ]
    return cells


def run_experiment(cfg: ExperimentConfig, progress: Callable | None = None):
    """Run every cell of ``cfg``; return ``(cells, manifest)``."""
    t0 = time.perf_counter()
    cells = run_cells(cfg, progress)
    golden = {}
    for c in cells:
        g = dict(c.golden)
        if c.reports:
            g.update({f"final_{k}": v for k, v in c.reports[-1].values().items()})
        g["completed"] = c.completed
        golden[c.name] = g
    manifest = RunManifest(
        config=cfg.to_dict(),
        version=__version__,
        eps=core.EPS,
        wall_time=time.perf_counter() - t0,
        golden=golden,
        events=[c.breakdown for c in cells if c.breakdown is not None],
    )
    return cells, manifest


__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "RunManifest",
    "CellResult",
    "balanced_circle_order",
    "half_circle_order",
    "equidistant_downdate_order",
    "run_experiment",
    "MATRIX_METHODS",
]
