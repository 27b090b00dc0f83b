import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_hiep, random_hpiep
from orthorec.core import HessenbergPencil, make_core
from orthorec.iep import InnerProductSpec, solve_hiep, update_node
from orthorec.metrics import (
    MetricReport,
    beyond_tridiagonal,
    err_node,
    err_orthogonality,
    err_pole,
    err_recurrence,
    err_recurrence_pencil,
    err_sup_approx,
    err_weight,
    node_pairing,
    propagate_basis,
    report_solution,
    sample_points,
    unitarity_defect,
)
from orthorec.poly_downdate import DowndateRequest, downdate_implicit


class TestOrthogonality:
    def test_identity(self):
        assert err_orthogonality(np.eye(4)) == 0

    def test_scaled_column(self):
        Q = np.eye(4, dtype=complex)
        Q[:, 2] *= 1 + 1e-8
        # (1 + d)^2 - 1
        assert abs(err_orthogonality(Q) - (2e-8 + 1e-16)) <= 1e-15


class TestRecurrence:
    def test_exact_solution(self):
        sol = solve_hiep(InnerProductSpec([0.5, -0.2 + 0.3j, 1j], [1, 2, 3]))
        assert err_recurrence(sol.nodes, sol.q, sol.h) <= 1e-14
        assert err_recurrence(np.diag(sol.nodes), sol.q, sol.h) <= 1e-14

    def test_perturbed(self):
        z = np.exp(2j * np.pi * np.arange(5) / 5)
        sol = solve_hiep(InnerProductSpec(z, np.ones(5)))
        H = sol.h.copy()
        H[0, 0] += 1e-6
        assert err_recurrence(z, sol.q, H) == pytest.approx(1e-6, rel=1e-3)

    def test_scalar(self):
        assert err_recurrence([2.0], [[1.0]], [[2.0]]) == 0
        assert err_recurrence([2.0], [[1.0]], [[3.0]]) == pytest.approx(1 / 3)

    def test_pencil(self):
        sol = random_hpiep(2, 6)
        P = sol.pencil
        assert err_recurrence_pencil(sol.nodes, sol.q, P.h, P.k) <= 1e-14


class TestWeight:
    def test_exact(self):
        w = np.array([3.0, 4.0])
        Q = np.array([[0.6, 0.8], [0.8, -0.6]])
        assert err_weight(Q, w) == 0

    def test_sign_flip(self):
        w = np.array([3.0, 4.0])
        Q = -np.array([[0.6, 0.8], [0.8, -0.6]])
        assert err_weight(Q, w) == pytest.approx(10.0)


class TestNodes:
    def test_one_by_one(self):
        assert err_node([2.0], np.array([[2.0]])) == 0

    def test_shifted(self):
        sol = random_hiep(1, 7)
        assert err_node(sol.nodes, sol.h + 1e-8 * np.eye(7)) == pytest.approx(1e-8, rel=1e-4)

    def test_pencil(self):
        sol = random_hpiep(4, 7)
        assert err_node(sol.nodes, sol.pencil) <= 1e-10

    def test_ambiguity_flag(self):
        p = node_pairing([0.0, 10.0], [1e-3, 2e-3])
        assert p.ambiguous[0]
        assert not node_pairing([0.0, 10.0], [1e-9, 10.0]).ambiguous.any()

    def test_exact_solve_large(self):
        m = 64
        z = np.exp(2j * np.pi * np.arange(m) / m)
        sol = solve_hiep(InnerProductSpec(z, np.ones(m)))
        assert err_node(z, sol.h) <= 1e-10


class TestPoles:
    def test_fresh_pencil(self):
        sol = random_hpiep(6, 8)
        assert err_pole(sol.pencil, sol.poles) <= 1e-14

    def test_relative_perturbation(self):
        H = np.array([[1, 1], [2.0, 1]], dtype=complex)
        K = np.array([[1, 0], [1.0, 1]], dtype=complex)
        P = HessenbergPencil(H, K)
        assert err_pole(P, [2.0 * (1 + 1e-7)]) == pytest.approx(1e-7, rel=1e-6)

    def test_infinite_exact(self):
        P = HessenbergPencil(np.triu(np.ones((3, 3)), -1) + np.eye(3), np.eye(3))
        assert err_pole(P, [np.inf, np.inf]) == 0

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            err_pole(HessenbergPencil(np.ones((2, 2)), np.eye(2)), [1.0, 2.0])


class TestSupError:
    def test_points(self):
        x = sample_points((0.0, 1.0), 7)
        assert len(x) == 70 and x[0] == 0 and x[-1] == 1

    def test_identity_and_constant(self):
        assert err_sup_approx(np.sin, np.sin, (0, 3), 5) == 0
        assert err_sup_approx(np.sin, lambda x: np.sin(x) + 1e-3, (0, 3), 5) == pytest.approx(1e-3)


class TestPropagate:
    def test_identity(self, rng):
        Q = rng.standard_normal((4, 4))
        np.testing.assert_array_equal(propagate_basis(Q), Q)

    def test_swap_core_permutes_columns(self, rng):
        Q = rng.standard_normal((3, 3)).astype(complex)
        swap = make_core(0.0, 1.0, 1)
        out = propagate_basis(Q, [swap])
        np.testing.assert_allclose(np.abs(out), np.abs(Q[:, [0, 2, 1]]), atol=1e-15)

    def test_update_then_downdate(self):
        sol = random_hiep(8, 9)
        new = update_node(sol, 2.0 + 0.5j, 0.7)
        out = downdate_implicit(new.h, DowndateRequest(2.0 + 0.5j))
        q = propagate_basis(new.q, out.transform, drop_first=True)
        q = propagate_basis(q, out.trailing_transform, phase=out.phase)
        keep = new.nodes != 2.0 + 0.5j
        assert err_weight(q, new.weights[keep]) <= 1e-10
        np.testing.assert_allclose(new.nodes[keep], sol.nodes)


class TestReport:
    def test_matrix_columns(self):
        r = report_solution(3, random_hiep(0, 5))
        assert r.columns() == ["k", "err_o", "err_r", "err_w", "err_node"]
        assert r.csv_row().startswith("3,")
        assert r.max_error() <= 1e-12

    def test_pencil_and_approx_columns(self):
        r = report_solution(0, random_hpiep(0, 5))
        r.err_f = 1.5
        assert r.columns()[-2:] == ["err_p", "err_f"]
        assert r.csv_row().endswith("1.500000e+00")

    def test_nonnegative(self):
        r = MetricReport(0, 0.0, 0.0, 0.0, 0.0)
        assert all(v >= 0 for v in r.values().values())


class TestStructureMeasures:
    def test_unitary(self):
        z = np.exp(2j * np.pi * np.arange(6) / 6)
        sol = solve_hiep(InnerProductSpec(z, np.ones(6)))
        assert unitarity_defect(sol.h) <= 1e-13

    def test_tridiagonal(self):
        assert beyond_tridiagonal(np.diag([1.0, 2, 3]) + np.diag([1.0, 1], 1)) == 0
        assert beyond_tridiagonal(np.triu(np.ones((3, 3)))) == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**31 - 1))
def test_phase_invariance(m, seed):
    sol = random_hiep(seed, m)
    rng = np.random.default_rng(seed)
    d = np.exp(2j * np.pi * rng.uniform(size=m))
    d[0] = 1
    D = np.diag(d)
    Q, H = sol.q @ D, D.conj() @ sol.h @ D
    for f, a, b in [(err_orthogonality, (sol.q,), (Q,)),
                    (err_recurrence, (sol.nodes, sol.q, sol.h), (sol.nodes, Q, H)),
                    (err_weight, (sol.q, sol.weights), (Q, sol.weights))]:
        assert abs(f(*a) - f(*b)) <= 1e-13
    assert abs(err_node(sol.nodes, sol.h) - err_node(sol.nodes, H)) <= 1e-10
    g = np.exp(1j * rng.uniform(0, 2 * np.pi))
    assert abs(err_orthogonality(g * sol.q) - err_orthogonality(sol.q)) <= 1e-14
    assert abs(err_recurrence(sol.nodes, g * sol.q, sol.h) - err_recurrence(sol.nodes, sol.q, sol.h)) <= 1e-14
