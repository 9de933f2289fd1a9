"""Vectorization convention and power-iteration checks."""

import numpy as np
import pytest

from risbeam.linalg import principal_eigvec, unvec, vec


def test_vec_is_column_major():
    a = np.array([[1, 2], [3, 4]])
    np.testing.assert_array_equal(vec(a), [1, 3, 2, 4])


def test_unvec_round_trip():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    np.testing.assert_array_equal(unvec(vec(a), 3, 5), a)


def test_unvec_rejects_bad_sizes():
    with pytest.raises(ValueError):
        unvec(np.zeros(5), 2, 3)


def test_kron_identity_uses_the_same_ordering():
    # vec(A X B) = (B^T kron A) vec(X) only holds for column-major vec
    rng = np.random.default_rng(1)
    a = rng.standard_normal((3, 3))
    x = rng.standard_normal((3, 2))
    b = rng.standard_normal((2, 2))
    lhs = vec(a @ x @ b)
    rhs = np.kron(b.T, a) @ vec(x)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_principal_eigvec_matches_dense_eigendecomposition():
    rng = np.random.default_rng(2)
    for n in (2, 5, 12):
        b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a = b @ b.conj().T
        v = principal_eigvec(a)
        evals, evecs = np.linalg.eigh(a)
        assert abs(abs(np.vdot(v, evecs[:, -1])) - 1.0) < 1e-6
        rayleigh = np.real(np.vdot(v, a @ v))
        assert abs(rayleigh - evals[-1]) < 1e-8 * evals[-1]
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12


def test_principal_eigvec_is_deterministic():
    rng = np.random.default_rng(3)
    b = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    a = b @ b.conj().T
    np.testing.assert_array_equal(principal_eigvec(a), principal_eigvec(a))


def test_principal_eigvec_zero_matrix():
    v = principal_eigvec(np.zeros((4, 4)))
    assert abs(np.linalg.norm(v) - 1.0) < 1e-12


def test_principal_eigvec_rejects_non_square():
    with pytest.raises(ValueError):
        principal_eigvec(np.zeros((2, 3)))
