"""Command line entry point ``orthorec``.

Subcommands
-----------
run
    Run an experiment from a JSON config and write one CSV per method,
    condition traces and a ``manifest.json``.
golden
    Run an experiment with its default configuration and print the final
    scalars (unitarity defect, distance from tridiagonal form, final metrics).
lsq
    Fit data read from CSV in the orthonormal basis of its nodes and weights
    and print the coefficients as JSON.

Exit codes: 0 clean, 2 partial (a method broke down), 1 invalid input.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid, OrthorecError
from .experiments import EXPERIMENTS, CellResult, ExperimentConfig, run_experiment

EXIT_CLEAN = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cell_filename(name: str) -> str:
    """File stem for a cell name such as ``'rational:implicit1'``."""
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", name)


def metrics_csv(cell: CellResult) -> str:
    if not cell.reports:
        return ""
    lines = [",".join(cell.reports[0].columns())]
    lines += [r.csv_row() for r in cell.reports]
    return "\n".join(lines) + "\n"


def conditions_csv(cell: CellResult) -> str:
    if not cell.conditions:
        return ""
    cols = list(cell.conditions[0])
    lines = [",".join(cols)]
    for row in cell.conditions:
        lines.append(",".join(str(row[c]) if c == "k" else f"{float(row[c]):.6e}" for c in cols))
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(data)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _progress_printer(stream):
    def progress(name, k):
        if k % 25 == 0:
            print(f"  {name}: step {k}", file=stream, flush=True)
    return progress


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    cells, manifest = run_experiment(cfg, None if args.quiet else _progress_printer(sys.stderr))
    for cell in cells:
        stem = cell_filename(cell.name)
        _atomic_write(out / f"{stem}.csv", metrics_csv(cell))
        cond = conditions_csv(cell)
        if cond:
            _atomic_write(out / f"{stem}_conditions.csv", cond)
    _atomic_write(out / "manifest.json", json.dumps(_jsonable(manifest.to_dict()), indent=2) + "\n")
    for ev in manifest.events:
        print(f"breakdown: {ev['method']} at k={ev['k']}: {ev['message']}", file=sys.stderr)
    return EXIT_PARTIAL if manifest.events else EXIT_CLEAN


def cmd_golden(args) -> int:
    overrides = {"metrics_every": 0}
    if args.m is not None:
        overrides["m"] = args.m
    if args.ell is not None:
        overrides["ell"] = args.ell
    if args.order is not None:
        overrides["order"] = args.order
    cfg = ExperimentConfig(args.experiment, **overrides)
    _, manifest = run_experiment(cfg)
    print(f"experiment {cfg.experiment}  m={cfg.m}  steps={cfg.ell}  order={cfg.order}")
    for name, g in manifest.golden.items():
        parts = [f"{k}={v:.3e}" for k, v in g.items() if isinstance(v, float)]
        status = "completed" if g.get("completed") else "breakdown"
        print(f"{name:24s} {status:10s} " + "  ".join(parts))
    for ev in manifest.events:
        print(f"breakdown: {ev['method']} at k={ev['k']}: {ev['message']}")
    return EXIT_PARTIAL if manifest.events else EXIT_CLEAN


def _parse_poles(text: str) -> list[complex]:
    out = []
    for tok in text.split(","):
        tok = tok.strip().replace(" ", "")
        if tok.lower() in ("inf", "infinity"):
            out.append(complex(np.inf))
        else:
            out.append(complex(tok))
    return out


def cmd_lsq(args) -> int:
    from .iep import InnerProductSpec, solve_hiep, solve_hpiep
    from .least_squares import lsq_fit

    try:
        z, w, f = _read_data(args.data)
        spec = InnerProductSpec(z, w)
        if args.poles:
            poles = _parse_poles(args.poles)
            if len(poles) != spec.m - 1:
                raise ConfigInvalid(f"expected {spec.m - 1} poles, got {len(poles)}")
            sol = solve_hpiep(spec, poles, method="update")
        else:
            sol = solve_hiep(spec)
        n = spec.m if args.n is None else args.n
        model = lsq_fit(sol, f, n)
    except (ValueError, OrthorecError) as exc:
        raise ConfigInvalid(str(exc)) from None
    text = model.to_json() + "\n"
    if args.out:
        _atomic_write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_CLEAN


def _read_data(path):
    from .least_squares import read_data_csv

    try:
        return read_data_csv(path)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read data: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orthorec", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("--config", required=True, help="path to the JSON config")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--quiet", action="store_true", help="no progress output")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("golden", help="print the final scalars of an experiment")
    g.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    g.add_argument("--m", type=int, default=None, help="override the problem size")
    g.add_argument("--ell", type=int, default=None, help="override the number of steps")
    g.add_argument("--order", default=None, help="override the node order")
    g.set_defaults(func=cmd_golden)

    q = sub.add_parser("lsq", help="least squares fit of CSV data, coefficients as JSON")
    q.add_argument("--data", required=True, help="CSV with z_re,z_im,w_re,w_im,f_re,f_im")
    q.add_argument("--n", type=int, default=None, help="number of basis functions (default: all)")
    q.add_argument("--poles", default=None,
                   help="comma separated poles (m - 1 of them, 'inf' allowed) for a rational basis")
    q.add_argument("--out", default=None, help="write JSON here instead of stdout")
    q.set_defaults(func=cmd_lsq)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_CLEAN
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
