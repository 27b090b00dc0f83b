"""Shared problem generators and oracles."""
from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg as sla

from orthorec.iep import InnerProductSpec, solve_hiep, solve_hpiep


def random_nodes(rng, m, sep=1e-3, real=False):
    """``m`` nodes in the unit square (or interval) with pairwise distance >= ``sep``."""
    while True:
        z = rng.uniform(-1, 1, m)
        if not real:
            z = z + 1j * rng.uniform(-1, 1, m)
        z = z.astype(complex)
        D = np.abs(z[:, None] - z[None, :]) + np.eye(m) * 10
        if D.min() >= sep:
            return z


def random_weights(rng, m, complex_=True):
    mag = rng.uniform(0.5, 1.5, m)
    if not complex_:
        return mag.astype(complex)
    return mag * np.exp(2j * np.pi * rng.uniform(0, 1, m))


def random_poles(rng, nodes, count, finite_fraction=0.7):
    """Poles away from the nodes; a share of them infinite."""
    out = []
    for _ in range(count):
        if rng.uniform() > finite_fraction:
            out.append(complex(np.inf))
            continue
        while True:
            xi = 2.5 * np.exp(2j * np.pi * rng.uniform()) * rng.uniform(0.6, 1.4)
            if np.abs(nodes - xi).min() > 0.3:
                out.append(complex(xi))
                break
    return np.array(out)


def random_hiep(seed, m, real=False):
    rng = np.random.default_rng(seed)
    z = random_nodes(rng, m, real=real)
    w = random_weights(rng, m, complex_=not real)
    return solve_hiep(InnerProductSpec(z, w))


def random_hpiep(seed, m, method="update", finite_fraction=0.7):
    rng = np.random.default_rng(seed)
    z = random_nodes(rng, m)
    w = random_weights(rng, m)
    xi = random_poles(rng, z, m - 1, finite_fraction)
    return solve_hpiep(InnerProductSpec(z, w), xi, method=method)


def dense_arnoldi(z, w):
    """Independent oracle: Householder QR of the Krylov matrix (small m only).

    Returns ``(Q, H)`` with ``Q[:, 0] = w / ||w||`` and positive subdiagonal.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    m = len(z)
    K = np.stack([w * z**j for j in range(m)], axis=1)
    Q, R = np.linalg.qr(K)
    d = np.diag(R) / np.abs(np.diag(R))
    Q = Q * d[None, :]
    H = Q.conj().T @ (z[:, None] * Q)
    return Q, H


def spectrum_distance(a, b):
    """Max distance of a greedy nearest pairing between two equally long sets."""
    a = np.sort_complex(np.asarray(a, dtype=complex))
    b = np.asarray(b, dtype=complex)
    used = np.zeros(len(b), dtype=bool)
    worst = 0.0
    for x in a:
        d = np.abs(b - x)
        d[used] = np.inf
        j = int(np.argmin(d))
        used[j] = True
        worst = max(worst, float(d[j]))
    return worst


def pencil_eigs(H, K):
    return sla.eigvals(H, K)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


#: criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
