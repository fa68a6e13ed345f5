import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wishart_euler.linalg import (
    LinalgError,
    WishartParams,
    batched_singular_values,
    canonicalize,
    lq_decomposition,
    singular_values,
    sym_eigendecomposition,
)


def random_spd(rng, m):
    a = rng.standard_normal((m, m))
    return a @ a.T + m * np.eye(m)


def test_eig_diagonal():
    U, e = sym_eigendecomposition(np.diag([1.0, 3.0, 2.0]))
    assert np.allclose(e, [3, 2, 1])
    assert np.allclose(np.abs(U), np.eye(3)[:, [1, 2, 0]])


def test_eig_2x2_known():
    U, e = sym_eigendecomposition([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(e, [3, 1])
    assert np.allclose(U[:, 0], [1 / np.sqrt(2), 1 / np.sqrt(2)])


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_eig_reconstructs(m, seed):
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((m, m))
    S = S + S.T
    U, e = sym_eigendecomposition(S)
    assert np.allclose(U @ np.diag(e) @ U.T, S, atol=1e-10)
    assert np.allclose(U.T @ U, np.eye(m), atol=1e-12)
    assert np.all(np.diff(e) <= 0)
    assert np.allclose(e, np.sort(np.linalg.eigvalsh(S))[::-1], atol=1e-10)


def test_eig_rejects_nonsymmetric():
    with pytest.raises(LinalgError):
        sym_eigendecomposition([[1.0, 2.0], [0.0, 1.0]])


def test_lq_small():
    N, Q = lq_decomposition(np.array([[3.0, 4.0]]))
    assert np.allclose(N, [[5.0, 0.0]])
    assert np.allclose(Q, [[0.6, 0.8], [-0.8, 0.6]])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 4), st.integers(0, 2**32 - 1))
def test_lq_properties(m, extra, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((m, m + extra))
    N, Q = lq_decomposition(M)
    assert np.allclose(N @ Q, M, atol=1e-12)
    assert np.allclose(Q @ Q.T, np.eye(m + extra), atol=1e-12)
    assert np.allclose(np.triu(N, 1), 0)
    assert np.all(np.diag(N) >= 0)


def test_singular_values_match_numpy():
    rng = np.random.default_rng(3)
    for shape in [(2, 2), (2, 5), (3, 3), (4, 7)]:
        A = rng.standard_normal(shape)
        assert np.allclose(singular_values(A), np.linalg.svd(A, compute_uv=False), atol=1e-12)


@pytest.mark.parametrize("shape", [(2, 2), (2, 4), (3, 5)])
@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_batched_singular_values(shape, method):
    A = np.random.default_rng(5).standard_normal((200,) + shape)
    ref = np.linalg.svd(A, compute_uv=False)
    assert np.allclose(batched_singular_values(A, method=method), ref, atol=1e-10)


def test_params_validation():
    with pytest.raises(LinalgError):
        WishartParams(np.array([1.0, 1.0]), np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(LinalgError):
        WishartParams(np.array([1.0, -1.0]), np.zeros((2, 2)))
    with pytest.raises(LinalgError):
        WishartParams(np.array([1.0, 1.0, 1.0]), np.zeros((3, 2)))


def test_params_roundtrip():
    p = WishartParams.from_2x2(2, 1, 1, -1, 1)
    q = WishartParams.from_dict(p.to_dict())
    assert np.array_equal(q.scales, p.scales) and np.array_equal(q.mean, p.mean)


def test_canonical_input_is_fixed_point():
    p = canonicalize(np.diag([1.0, 0.5]), np.array([[1.0, 0.0], [-1.0, 1.0]]))
    assert np.allclose(p.scales, [1.0, 2.0])
    assert np.allclose(p.mean, [[1, 0], [-1, 1]])


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_canonicalize_invariants(m, extra, seed):
    rng = np.random.default_rng(seed)
    S = random_spd(rng, m)
    M = rng.standard_normal((m, m + extra))
    p = canonicalize(S, M)
    assert np.all(np.diff(p.scales) >= -1e-12)  # eigenvalues of S descending
    # A = S^(1/2) V + M and D V + N share the distribution of singular values;
    # M^T S^-1 M is the invariant that determines it
    inv = M.T @ np.linalg.solve(S, M)
    inv2 = p.mean.T @ np.diag(p.scales) @ p.mean
    assert np.allclose(np.linalg.eigvalsh(inv), np.linalg.eigvalsh(inv2), atol=1e-8)
    again = canonicalize(np.diag(1 / p.scales), p.mean)
    assert np.allclose(again.mean, p.mean, atol=1e-10)


def test_canonicalize_rejects_indefinite():
    with pytest.raises(LinalgError):
        canonicalize(np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros((2, 2)))
