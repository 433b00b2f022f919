import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracemda import tensor_core as tc
from tracemda.exceptions import DimensionError, SymmetryError

from conftest import random_symmetric


def definition_sum(A, B, n):
    """Einstein product straight from the index-sum definition."""
    left, shared, right = A.shape[: A.ndim - n], A.shape[A.ndim - n :], B.shape[n:]
    out = np.zeros(left + right)
    for i in itertools.product(*map(range, left)):
        for j in itertools.product(*map(range, right)):
            out[i + j] = sum(A[i + k] * B[k + j] for k in itertools.product(*map(range, shared)))
    return out


def unfold(A, mode):
    return np.moveaxis(A, mode, 0).reshape(A.shape[mode], -1)


def fold(M, mode, shape):
    full = (shape[mode],) + tuple(s for i, s in enumerate(shape) if i != mode)
    return np.moveaxis(M.reshape(full), 0, mode)


class TestEinsteinProduct:
    def test_identity_left(self, rng):
        A = rng.standard_normal((2, 3, 2, 3))
        I = tc.identity_tensor((2, 3))
        np.testing.assert_array_equal(tc.einstein_product(I, A, 2), A)

    def test_matrix_degeneration(self, rng):
        A, B = rng.standard_normal((3, 4)), rng.standard_normal((4, 5))
        np.testing.assert_allclose(tc.einstein_product(A, B, 1), A @ B, rtol=1e-14)

    def test_flattening_oracle(self, rng):
        A = rng.standard_normal((2, 3, 3, 2))
        B = rng.standard_normal((3, 2, 4))
        flat = A.reshape(6, 6) @ B.reshape(6, 4)
        expected = tc.group_unflatten(flat, (2, 3), (4,))
        assert np.max(np.abs(tc.einstein_product(A, B, 2) - expected)) < 1e-12

    @pytest.mark.parametrize("sa,sb,n", [((2, 3), (3, 2), 1), ((2, 2, 3), (2, 3, 2), 2), ((3, 2, 2), (2, 2, 2, 1), 2)])
    def test_definition_sum(self, rng, sa, sb, n):
        A, B = rng.standard_normal(sa), rng.standard_normal(sb)
        np.testing.assert_allclose(tc.einstein_product(A, B, n), definition_sum(A, B, n), atol=1e-12)

    def test_shape_mismatch_names_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 2\)"):
            tc.einstein_product(np.ones((2, 3)), np.ones((2, 2)), 1)


class TestModeProduct:
    def test_identity_matrix(self, rng):
        A = rng.standard_normal((3, 4, 5))
        np.testing.assert_array_equal(tc.m_mode_product(A, np.eye(4), 1), A)

    def test_scaling(self):
        A = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(tc.m_mode_product(A, 2 * np.eye(2), 0), 2 * A)

    def test_unfold_oracle(self, rng):
        A = rng.standard_normal((3, 4, 5))
        Z = rng.standard_normal((2, 4))
        expected = fold(Z @ unfold(A, 1), 1, (3, 2, 5))
        np.testing.assert_allclose(tc.m_mode_product(A, Z, 1), expected, atol=1e-13)

    def test_consistent_with_einstein(self, rng):
        A = rng.standard_normal((3, 2, 4))
        Z = rng.standard_normal((4, 6))
        np.testing.assert_allclose(
            tc.einstein_product(A, Z, 1), tc.m_mode_product(A, Z.T, 2), atol=1e-13
        )

    def test_errors(self):
        with pytest.raises(DimensionError):
            tc.m_mode_product(np.ones((2, 3)), np.ones((2, 2)), 1)
        with pytest.raises(DimensionError):
            tc.m_mode_product(np.ones((2, 3)), np.ones((2, 2)), 5)


class TestTransposeSym:
    def test_involution(self, rng):
        A = rng.standard_normal((2, 3, 4, 5))
        np.testing.assert_array_equal(tc.transpose(tc.transpose(A)), A)

    def test_symmetric_fixed(self, rng):
        A = random_symmetric(rng, (2, 3))
        np.testing.assert_allclose(tc.transpose(A), A, atol=0)

    def test_flattening_oracle(self, rng):
        A = rng.standard_normal((2, 3, 2, 3))
        np.testing.assert_array_equal(tc.group_flatten(tc.transpose(A)), A.reshape(6, 6).T)

    def test_odd_order_rejected(self):
        with pytest.raises(DimensionError):
            tc.transpose(np.ones((2, 3, 4)))

    def test_projection_split(self, rng):
        P = rng.standard_normal((2, 3, 4))
        assert tc.transpose(P, 2).shape == (4, 2, 3)

    def test_sym(self, rng):
        A = rng.standard_normal((2, 3, 2, 3))
        S = tc.sym(A)
        assert tc.is_symmetric(S)
        np.testing.assert_allclose(tc.group_flatten(S), 0.5 * (A.reshape(6, 6) + A.reshape(6, 6).T))
        np.testing.assert_allclose(tc.sym(A - tc.transpose(A)), 0, atol=1e-15)
        np.testing.assert_array_equal(tc.sym(S), S)

    def test_check_symmetric(self, rng):
        with pytest.raises(SymmetryError):
            tc.check_symmetric(rng.standard_normal((3, 3)))
        with pytest.raises(DimensionError):
            tc.check_symmetric(np.ones((2, 3)))


class TestIdentityInner:
    def test_identity(self):
        np.testing.assert_array_equal(tc.identity_tensor((3,)), np.eye(3))
        I = tc.identity_tensor((2, 3))
        np.testing.assert_array_equal(tc.einstein_product(I, I, 2), I)
        assert tc.trace(I) == 6
        np.testing.assert_array_equal(tc.group_flatten(I), np.eye(6))

    def test_diagonal(self):
        D = tc.diagonal_tensor([[5.0, 2.0], [1.0, 7.0]])
        assert D.shape == (2, 2, 2, 2)
        assert D[1, 1, 1, 1] == 7.0 and D[0, 1, 1, 0] == 0.0

    def test_inner(self, rng):
        A, B = rng.standard_normal((2, 3, 4)), rng.standard_normal((2, 3, 4))
        assert tc.inner_product(A, A) == pytest.approx(tc.frobenius_norm(A) ** 2)
        assert tc.inner_product(np.eye(2), np.eye(2)) == 2.0
        assert tc.inner_product(A, B) == pytest.approx(float(A.ravel() @ B.ravel()), rel=1e-14)
        with pytest.raises(DimensionError):
            tc.inner_product(A, B[..., :2])

    def test_inner_is_trace_form(self, rng):
        A, Z = rng.standard_normal((2, 3, 4)), rng.standard_normal((2, 3, 4))
        # <A, Z> = Tr(A *_3 Z^T) with Z^T swapping the group (2,3,4) and an empty one.
        AZ = tc.einstein_product(A, Z, 3)
        assert float(AZ) == pytest.approx(tc.inner_product(A, Z), rel=1e-13)


class TestFlattenSlices:
    def test_round_trip(self, rng):
        A = rng.standard_normal((2, 3, 4, 5))
        M = tc.group_flatten(A, 2)
        assert M.shape == (6, 20)
        np.testing.assert_array_equal(tc.group_unflatten(M, (2, 3), (4, 5)), A)
        with pytest.raises(DimensionError):
            tc.group_unflatten(M, (2, 2), (4, 5))

    def test_lexicographic_linearization(self):
        A = np.arange(24.0).reshape(2, 3, 4)
        # first index slowest: row index = i1 * 3 + i2
        assert tc.group_flatten(A, 2)[1 * 3 + 2, 3] == A[1, 2, 3]

    def test_slices(self, rng):
        A = rng.standard_normal((2, 3, 4))
        np.testing.assert_array_equal(tc.stack_slices(tc.frontal_slices(A)), A)
        np.testing.assert_array_equal(tc.frontal_slice(A, 2), A[:, :, 2])
        with pytest.raises(IndexError):
            tc.frontal_slice(A, 4)

    def test_identity_slice_one_hot(self):
        I = tc.identity_tensor((2, 2)).reshape(2, 2, 4)
        S = tc.frontal_slice(I, 3)
        np.testing.assert_array_equal(S, [[0, 0], [0, 1]])


shapes = st.lists(st.integers(1, 3), min_size=1, max_size=3).map(tuple)


@settings(max_examples=60, deadline=None)
@given(sa=shapes, sk=shapes, sb=shapes, seed=st.integers(0, 2**32 - 1))
def test_isomorphism(sa, sk, sb, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal(sa + sk)
    B = rng.standard_normal(sk + sb)
    n = len(sk)
    lhs = tc.group_flatten(tc.einstein_product(A, B, n), len(sa))
    rhs = tc.group_flatten(A, len(sa)) @ tc.group_flatten(B, n)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(shape=shapes, tail=shapes, seed=st.integers(0, 2**32 - 1))
def test_adjoint_identity_and_transpose_laws(shape, tail, seed):
    rng = np.random.default_rng(seed)
    m = len(shape)
    A = rng.standard_normal(shape * 2)
    B = rng.standard_normal(shape * 2)
    Z = rng.standard_normal(shape + tail)
    W = rng.standard_normal(shape + tail)
    lhs = tc.inner_product(tc.einstein_product(A, Z, m), W)
    rhs = tc.inner_product(Z, tc.einstein_product(tc.transpose(A), W, m))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)
    I = tc.identity_tensor(shape)
    np.testing.assert_allclose(tc.einstein_product(I, A, m), A, atol=1e-14)
    np.testing.assert_allclose(tc.einstein_product(A, I, m), A, atol=1e-14)
    np.testing.assert_allclose(
        tc.transpose(tc.einstein_product(A, B, m)),
        tc.einstein_product(tc.transpose(B), tc.transpose(A), m),
        atol=1e-12,
    )
    ZJ = rng.standard_normal(shape + (3,))
    Y = rng.standard_normal((3, 4))
    np.testing.assert_allclose(
        tc.einstein_product(ZJ, Y, 1), tc.m_mode_product(ZJ, Y.T, m), atol=1e-12
    )
    assert math.isclose(tc.trace(I), math.prod(shape))
