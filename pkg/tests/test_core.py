import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orthorec import core
from orthorec.core import (
    CoreTransformation,
    HessenbergPencil,
    ToleranceConfig,
    cores_product,
    greedy_match,
    is_proper,
    is_proper_pencil,
    make_core,
    make_row_core,
    reduce_to_e1,
    rq_factorize_shifted,
)
from orthorec.errors import IndexOutOfRange, NotProper, ZeroPair

EPS = np.finfo(float).eps

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)


def random_hessenberg(rng, m):
    A = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return np.triu(A, -1)


class TestCoreTransformation:
    def test_block_is_unitary(self):
        c = make_core(3.0, 4.0j)
        G = c.block
        np.testing.assert_allclose(G.conj().T @ G, np.eye(2), atol=1e-15)

    def test_annihilates_second_entry(self):
        c = make_core(3.0, 4.0)
        out = c.block @ np.array([3.0, 4.0])
        assert abs(out[1]) < 1e-15
        assert abs(abs(out[0]) - 5.0) < 1e-14

    def test_zero_pair_raises(self):
        with pytest.raises(ZeroPair):
            make_core(0, 0)

    def test_identity_when_second_is_zero(self):
        c = make_core(2.0 + 1j, 0.0)
        assert c.c == 1.0 and c.s == 0

    def test_inverse(self):
        c = make_core(1.0 + 2j, -0.5j, index=0)
        np.testing.assert_allclose(c.H.block @ c.block, np.eye(2), atol=1e-15)

    def test_embed_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            CoreTransformation(3, 1.0, 0j).embed(4)

    def test_embed_places_block(self):
        c = make_core(1.0, 1.0, index=1)
        E = c.embed(4)
        np.testing.assert_allclose(E[1:3, 1:3], c.block)
        assert E[0, 0] == 1 and E[3, 3] == 1

    @given(cplx, cplx)
    def test_make_core_property(self, a, b):
        if a == 0 and b == 0:
            return
        c = make_core(a, b)
        assert c.c >= 0
        assert abs(c.c**2 + abs(c.s) ** 2 - 1) < 1e-14
        out = c.block @ np.array([a, b])
        assert abs(out[1]) <= 1e-13 * max(abs(a), abs(b))

    @given(cplx, cplx)
    def test_row_core_property(self, a, b):
        c = make_row_core(a, b)
        row = np.array([a, b]) @ c.block.conj().T
        assert abs(row[0]) <= 1e-13 * max(abs(a), abs(b), 1e-300)


class TestApplication:
    def test_rows_and_cols_match_dense(self, rng):
        A = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        c = make_core(0.3 + 0.1j, -0.7, index=2)
        G = c.embed(5)
        B = A.copy()
        core.rows_apply(B, c)
        np.testing.assert_allclose(B, G @ A, atol=1e-14)
        B = A.copy()
        core.cols_apply(B, c, adjoint=True)
        np.testing.assert_allclose(B, A @ G.conj().T, atol=1e-14)

    def test_sequence_matches_product(self, rng):
        cores = [make_core(*rng.standard_normal(2), index=i) for i in (0, 2, 1, 3)]
        A = np.eye(5, dtype=complex)
        core.rows_apply_seq(A, cores)
        expected = np.eye(5)
        for c in cores:
            expected = c.embed(5) @ expected
        np.testing.assert_allclose(A, expected, atol=1e-14)
        np.testing.assert_allclose(cores_product(cores, 5),
                                   np.linalg.multi_dot([c.embed(5) for c in cores]), atol=1e-14)

    def test_apply_core_left_right_copy(self, rng):
        A = rng.standard_normal((3, 3)).astype(complex)
        c = make_core(1.0, 2.0, 0)
        L = core.apply_core_left(c, A)
        R = core.apply_core_right(c, A)
        np.testing.assert_allclose(L, c.embed(3) @ A, atol=1e-14)
        assert not np.shares_memory(L, A) and not np.shares_memory(R, A)


class TestReduceToE1:
    @pytest.mark.parametrize("m", [1, 2, 5, 17])
    def test_reduces(self, rng, m):
        x = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        cores, alpha = reduce_to_e1(x)
        assert len(cores) == max(m - 1, 0)
        P = cores_product(cores, m) if m > 1 else np.eye(1)
        y = P @ x
        np.testing.assert_allclose(y[1:], 0, atol=1e-14 * np.linalg.norm(x))
        assert abs(abs(alpha) - np.linalg.norm(x)) < 1e-13

    def test_e1_needs_no_rotation(self):
        cores, alpha = reduce_to_e1(np.array([2.0, 0, 0]))
        assert all(c.c == 1.0 for c in cores)
        assert alpha == 2.0


class TestRQ:
    def test_reconstructs(self, rng):
        H = random_hessenberg(rng, 8)
        R, cores = rq_factorize_shifted(H, 0.4 - 0.1j)
        assert np.allclose(np.tril(R, -1), 0)
        Q = cores_product(cores, 8)
        err = np.linalg.norm(R @ Q - (H - (0.4 - 0.1j) * np.eye(8)))
        assert err <= 10 * 8 * EPS * np.linalg.norm(H)

    def test_perfect_shift_reveals_r11(self):
        H = np.array([[0, 1], [1, 0]], dtype=complex)
        R, cores = rq_factorize_shifted(H, 1.0)
        assert abs(R[0, 0]) < 1e-15
        Q = cores_product(cores, 2)
        # first row of the orthogonal factor spans the eigenvector for 1
        np.testing.assert_allclose(np.abs(Q[0]), [1 / np.sqrt(2)] * 2, atol=1e-15)

    def test_not_proper(self):
        H = np.array([[1, 2], [0, 3]], dtype=complex)
        with pytest.raises(NotProper):
            rq_factorize_shifted(H)


class TestHessenbergPencil:
    def test_rejects_fill(self):
        with pytest.raises(ValueError):
            HessenbergPencil(np.ones((3, 3)), np.eye(3))

    def test_poles(self):
        H = np.array([[1, 2], [3, 4]], dtype=complex)
        K = np.array([[1, 0], [0, 1]], dtype=complex)
        P = HessenbergPencil(H, K)
        assert np.isinf(P.poles()[0])
        K[1, 0] = 1.5
        assert HessenbergPencil(H, K).poles()[0] == 2.0

    def test_properness(self):
        H = np.array([[1, 2], [3, 4]], dtype=complex)
        assert is_proper(H)
        assert not is_proper(np.array([[1, 2], [0, 4]], dtype=complex))
        P = HessenbergPencil(H, np.eye(2))
        assert is_proper_pencil(P)
        # parallel first columns are not proper
        assert not is_proper_pencil(HessenbergPencil(H, H / 2))


class TestMisc:
    def test_tolerance_config_validation(self):
        with pytest.raises(ValueError):
            ToleranceConfig(eps_mach=0)
        with pytest.raises(ValueError):
            ToleranceConfig(properness_tol=float("nan"))

    def test_greedy_match_identity(self):
        a = np.array([1, 2, 3j])
        perm, dist = greedy_match(a, a[::-1])
        np.testing.assert_array_equal(perm, [2, 1, 0])
        assert dist.max() == 0

    def test_reference_eigen(self):
        H = np.diag([1.0, 2.0, 3.0]).astype(complex)
        assert np.allclose(np.sort(core.reference_eigen(H).real), [1, 2, 3])

    def test_reference_eigen_pencil_infinite(self):
        P = HessenbergPencil(np.eye(2), np.diag([1.0, 0.0]))
        ev = core.reference_eigen_pencil(P)
        assert np.isinf(ev).sum() == 1

    @settings(max_examples=30)
    @given(st.integers(2, 12), st.integers(0, 2**31))
    def test_rq_property(self, m, seed):
        rng = np.random.default_rng(seed)
        H = random_hessenberg(rng, m)
        H[np.arange(1, m), np.arange(m - 1)] += 2.0  # keep it proper
        R, cores = rq_factorize_shifted(H, 0.0)
        Q = cores_product(cores, m)
        assert np.linalg.norm(R @ Q - H) <= 10 * m * EPS * np.linalg.norm(H)
        assert np.linalg.norm(Q.conj().T @ Q - np.eye(m)) <= 10 * m * EPS
