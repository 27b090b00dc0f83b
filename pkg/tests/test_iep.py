import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_arnoldi, random_hiep, random_hpiep, random_nodes, random_weights, spectrum_distance
from orthorec.core import reference_eigen, reference_eigen_pencil
from orthorec.errors import DuplicateNode, PoleEqualsNode
from orthorec.iep import (
    HiepSolution,
    InnerProductSpec,
    as_poles,
    pole_pair,
    restore_weight_structure,
    solve_hiep,
    solve_hpiep,
    update_node,
)

seeds = st.integers(0, 2**31 - 1)


class TestInnerProductSpec:
    def test_duplicate_nodes(self):
        with pytest.raises(DuplicateNode):
            InnerProductSpec([1.0, 2.0, 1.0], [1, 1, 1])

    def test_zero_weight(self):
        with pytest.raises(ValueError):
            InnerProductSpec([1.0, 2.0], [1.0, 0.0])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            InnerProductSpec([1.0, 2.0], [1.0])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            InnerProductSpec([1.0, np.nan], [1.0, 1.0])


class TestPoles:
    def test_pole_pair_finite(self):
        mu, nu = pole_pair(2.0 + 1j)
        assert abs(mu / nu - (2 + 1j)) < 1e-15
        assert abs(abs(mu) ** 2 + abs(nu) ** 2 - 1) < 1e-15

    def test_pole_pair_infinite(self):
        assert pole_pair(np.inf) == (1.0, 0j)
        assert pole_pair(None) == (1.0, 0j)

    def test_as_poles(self):
        p = as_poles([None, 1.0, complex(np.inf, 0)])
        assert np.isinf(p[0]) and p[1] == 1 and np.isinf(p[2])

    def test_pole_on_node(self):
        with pytest.raises(PoleEqualsNode):
            solve_hpiep(InnerProductSpec([0.0, 1.0, 2.0], [1, 1, 1]), [1.0, np.inf])


class TestSolveHiep:
    def test_two_nodes_closed_form(self):
        # nodes -1, 1 with equal weights: H = [[0, 1], [1, 0]]
        sol = solve_hiep(InnerProductSpec([-1.0, 1.0], [1.0, 1.0]))
        np.testing.assert_allclose(sol.h, [[0, 1], [1, 0]], atol=1e-15)

    def test_one_node(self):
        sol = solve_hiep(InnerProductSpec([3.0 + 1j], [2.0]))
        assert sol.h.shape == (1, 1)
        assert abs(sol.h[0, 0] - (3 + 1j)) < 1e-15

    @pytest.mark.parametrize("m", [3, 5, 7])
    def test_matches_dense_oracle(self, m):
        rng = np.random.default_rng(m)
        z = random_nodes(rng, m, sep=0.2)
        w = random_weights(rng, m)
        sol = solve_hiep(InnerProductSpec(z, w))
        Q, H = dense_arnoldi(z, w)
        np.testing.assert_allclose(sol.h, H, atol=1e-10)
        np.testing.assert_allclose(sol.q, Q, atol=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 20), seeds)
    def test_residuals_property(self, m, seed):
        sol = random_hiep(seed, m)
        r = sol.residuals()
        assert r["recurrence"] <= 1e-12
        assert r["orthogonality"] <= 1e-12
        assert r["weight"] <= 1e-12
        assert np.all(np.tril(sol.h, -2) == 0)
        assert spectrum_distance(sol.nodes, reference_eigen(sol.h)) <= 1e-9

    def test_real_nodes_give_tridiagonal(self):
        sol = random_hiep(4, 10, real=True)
        assert np.linalg.norm(np.triu(sol.h, 2)) <= 1e-13
        np.testing.assert_allclose(sol.h, sol.h.conj().T, atol=1e-13)


class TestSolveHpiep:
    @pytest.mark.parametrize("method", ["arnoldi", "update"])
    @pytest.mark.parametrize("m", [2, 5, 9])
    def test_contract(self, m, method):
        sol = random_hpiep(m, m, method=method)
        r = sol.residuals()
        assert r["recurrence"] <= 1e-11
        assert r["orthogonality"] <= 1e-11
        assert r["weight"] <= 1e-11
        for (h, k), xi in zip(sol.pencil.pole_pairs(), sol.poles):
            if np.isinf(xi):
                assert abs(k) <= 1e-12 * abs(h)
            else:
                assert abs(h / k - xi) <= 1e-9 * abs(xi)
        assert spectrum_distance(sol.nodes, reference_eigen_pencil(sol.pencil)) <= 1e-9

    def test_all_infinite_poles_reduce_to_polynomial(self):
        rng = np.random.default_rng(8)
        z = random_nodes(rng, 6)
        w = random_weights(rng, 6)
        spec = InnerProductSpec(z, w)
        rat = solve_hpiep(spec, [np.inf] * 5)
        pol = solve_hiep(spec)
        np.testing.assert_allclose(rat.pencil.k, np.eye(6), atol=1e-14)
        np.testing.assert_allclose(np.abs(rat.pencil.h), np.abs(pol.h), atol=1e-12)

    def test_wrong_pole_count(self):
        with pytest.raises(ValueError):
            solve_hpiep(InnerProductSpec([0.0, 1.0], [1, 1]), [])

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            solve_hpiep(InnerProductSpec([0.0, 1.0], [1, 1]), [np.inf], method="qr")

    def test_update_gives_unitary_k(self):
        sol = random_hpiep(3, 8, method="update")
        K = sol.pencil.k
        assert np.linalg.norm(K.conj().T @ K - np.eye(8)) <= 1e-13


class TestUpdateNode:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 10), seeds)
    def test_matrix_update_matches_rebuild(self, m, seed):
        sol = random_hiep(seed, m)
        rng = np.random.default_rng(seed + 1)
        while True:
            z = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
            if np.abs(sol.nodes - z).min() > 1e-2:
                break
        new = update_node(sol, z, 0.8)
        ref = solve_hiep(InnerProductSpec(new.nodes, new.weights))
        np.testing.assert_allclose(np.abs(new.h), np.abs(ref.h), atol=1e-9)
        r = new.residuals()
        assert max(r.values()) <= 1e-12

    def test_pencil_update(self):
        sol = random_hpiep(11, 6)
        new = update_node(sol, 0.3 + 0.3j, 1.0, 4.0)
        assert new.m == 7
        assert max(new.residuals().values()) <= 1e-12
        assert abs(new.pencil.poles()[-1] - 4.0) <= 1e-10

    def test_pencil_update_requires_pole(self):
        sol = random_hpiep(11, 4)
        with pytest.raises(ValueError):
            update_node(sol, 0.3, 1.0)

    def test_duplicate_node(self):
        sol = random_hiep(0, 4)
        with pytest.raises(DuplicateNode):
            update_node(sol, sol.nodes[2], 1.0)

    def test_zero_weight(self):
        sol = random_hiep(0, 4)
        with pytest.raises(ValueError):
            update_node(sol, 5.0, 0.0)


class TestRestoreWeightStructure:
    def test_restores(self, rng):
        m = 7
        sol = random_hiep(2, m)
        v = np.zeros(m, dtype=complex)
        v[:2] = [0.6, 0.8j]
        H, cores, v2 = restore_weight_structure(sol.h, v)
        np.testing.assert_allclose(v2[1:], 0, atol=1e-15)
        assert abs(abs(v2[0]) - 1) < 1e-14
        assert np.all(np.tril(H, -2) == 0)
        assert spectrum_distance(reference_eigen(sol.h), reference_eigen(H)) <= 1e-10

    def test_noop_on_e1(self):
        sol = random_hiep(2, 4)
        v = np.array([1, 0, 0, 0], dtype=complex)
        H, cores, _ = restore_weight_structure(sol.h, v)
        assert cores == []
        np.testing.assert_array_equal(H, sol.h)
