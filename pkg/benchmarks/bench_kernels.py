"""Compare the compiled kernels with the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 100 500] [--repeat 5]

Part one times each kernel in isolation.  Part two runs the same downdating
sequence end to end in two fresh interpreters, one forced onto the fallback
with ``ORTHOREC_PURE_PYTHON=1``.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from orthorec._kernels import _pykernels as py

try:
    from orthorec._kernels import _ckernels as cy
except ImportError:
    cy = None

END_TO_END = """
import time
import orthorec
from orthorec.experiments import ExperimentConfig, run_experiment
cfg = ExperimentConfig("unit_circle_poly", m={m}, ell={ell}, metrics_every=0)
t = time.perf_counter()
run_experiment(cfg)
print(orthorec.BACKEND, time.perf_counter() - t)
"""


def _hessenberg(rng, m):
    A = np.triu(rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)), -1)
    A[np.arange(1, m), np.arange(m - 1)] += 3
    return np.ascontiguousarray(A)


def _cases(mod, m, rng):
    A = _hessenberg(rng, m)
    n = 3 * m
    idx = rng.integers(0, m - 1, n).astype(np.int64)
    G = np.empty((n, 2, 2), dtype=complex)
    G[:] = np.array([[0.6, 0.8j], [0.8j, 0.6]])
    x = rng.standard_normal(m) + 0j
    return {
        "rot_rows": lambda: mod.rot_rows(A, m // 2, 0.6, 0.8j, 0.8j, 0.6, 0, m),
        "apply_rows_seq": lambda: mod.apply_rows_seq(A, idx, G, 0, m),
        "apply_cols_seq": lambda: mod.apply_cols_seq(A, idx, G, 0, m),
        "forward_recurrence": lambda: mod.forward_recurrence(A),
        "backward_correct": lambda: mod.backward_correct(A, x.copy(), 1e-3),
    }


def bench_kernels(sizes, repeat):
    print(f"{'kernel':20s} {'m':>5s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for m in sizes:
        rng = np.random.default_rng(m)
        pc = _cases(py, m, rng)
        cc = _cases(cy, m, rng) if cy else {}
        for name, fn in pc.items():
            tp = min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3
            if name in cc:
                tc = min(timeit.repeat(cc[name], number=1, repeat=repeat)) * 1e3
                print(f"{name:20s} {m:5d} {tp:12.3f} {tc:12.3f} {tp / tc:8.1f}")
            else:
                print(f"{name:20s} {m:5d} {tp:12.3f} {'n/a':>12s} {'':>8s}")


def bench_end_to_end(m, ell):
    print(f"\nend to end: unit circle, m={m}, {ell} downdates, all four matrix methods")
    code = END_TO_END.format(m=m, ell=ell)
    for pure in ("", "1"):
        env = dict(os.environ, ORTHOREC_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, seconds = out.stdout.split()
        print(f"  {backend:8s} {float(seconds):8.2f} s")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 500])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--m", type=int, default=200, help="size of the end-to-end run")
    ap.add_argument("--ell", type=int, default=50, help="downdates in the end-to-end run")
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled kernels not built; only the fallback is timed")
    bench_kernels(args.sizes, args.repeat)
    if not args.skip_end_to_end:
        bench_end_to_end(args.m, args.ell)


if __name__ == "__main__":
    main()
