import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussalign.errors import DimensionError, InvalidInputError, NotInvertibleError, NotPSDError
from gaussalign.spectra import (
    clamped_eigvalsh,
    is_psd,
    sqrt_and_inv_sqrt,
    sqrt_psd,
    sym_eig,
)

from _util import random_orthogonal, random_pd


def test_sym_eig_sorts_descending_with_axis_vectors():
    dec = sym_eig(np.diag([1.0, 3.0, 2.0]))
    np.testing.assert_array_equal(dec.eigenvalues, [3.0, 2.0, 1.0])
    np.testing.assert_array_equal(dec.eigenvectors, np.eye(3)[:, [1, 2, 0]])


def test_sym_eig_identity_basis_for_ties():
    dec = sym_eig(5.0 * np.eye(4))
    np.testing.assert_array_equal(dec.eigenvalues, np.full(4, 5.0))
    np.testing.assert_allclose(dec.eigenvectors, np.eye(4), atol=1e-15)


def test_sym_eig_tied_block_inside_rotation_is_canonical():
    # the tied eigenspace is span(e1, e2); any rotation of it must map to the axes
    m = np.diag([2.0, 2.0, 7.0])
    dec = sym_eig(m)
    np.testing.assert_array_equal(dec.eigenvalues, [7.0, 2.0, 2.0])
    np.testing.assert_allclose(np.abs(dec.eigenvectors), np.eye(3)[:, [2, 0, 1]], atol=1e-15)


def test_sym_eig_two_by_two_oracle():
    # [[2,1],[1,2]] has eigenpairs 3 -> (1,1)/sqrt2 and 1 -> (1,-1)/sqrt2
    dec = sym_eig([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_allclose(dec.eigenvalues, [3.0, 1.0], atol=1e-14)
    s = 1 / math.sqrt(2)
    np.testing.assert_allclose(dec.eigenvectors[:, 0], [s, s], atol=1e-14)
    np.testing.assert_allclose(np.abs(dec.eigenvectors[:, 1]), [s, s], atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), d=st.integers(1, 8))
def test_sym_eig_reconstructs_and_is_orthogonal(seed, d):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((d, d))
    m = m + m.T
    dec = sym_eig(m)
    q = dec.eigenvectors
    assert np.all(np.diff(dec.eigenvalues) <= 0)
    np.testing.assert_allclose(q.T @ q, np.eye(d), atol=1e-12)
    np.testing.assert_allclose(dec.reconstruct(), m, atol=1e-12 * max(1.0, np.abs(m).max()))
    # sign convention: the first largest-magnitude entry of each column is positive
    idx = np.argmax(np.abs(q) >= np.abs(q).max(axis=0) * (1 - 1e-12), axis=0)
    assert np.all(q[idx, np.arange(d)] > 0)


def test_sym_eig_is_deterministic():
    m = random_pd(np.random.default_rng(3), 6)
    a, b = sym_eig(m), sym_eig(m.copy())
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
    assert a.eigenvectors.tobytes() == b.eigenvectors.tobytes()


def test_sqrt_psd_oracles():
    np.testing.assert_allclose(sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-15)
    r3 = math.sqrt(3.0)
    expected = 0.5 * np.array([[r3 + 1, r3 - 1], [r3 - 1, r3 + 1]])
    np.testing.assert_allclose(sqrt_psd([[2.0, 1.0], [1.0, 2.0]]), expected, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), d=st.integers(1, 7))
def test_sqrt_squares_back(seed, d):
    m = random_pd(np.random.default_rng(seed), d)
    r = sqrt_psd(m)
    np.testing.assert_allclose(r, r.T, atol=0)
    np.testing.assert_allclose(r @ r, m, rtol=1e-10, atol=1e-10 * np.abs(m).max())
    s, s_inv = sqrt_and_inv_sqrt(m)
    np.testing.assert_allclose(s @ s_inv, np.eye(d), atol=1e-8)


def test_round_off_negative_eigenvalue_is_clamped():
    m = np.diag([1.0, -1e-12])
    np.testing.assert_array_equal(clamped_eigvalsh(m), [1.0, 0.0])
    np.testing.assert_array_equal(sqrt_psd(m), np.diag([1.0, 0.0]))


def test_genuinely_negative_matrix_rejected():
    with pytest.raises(NotPSDError, match="not positive semidefinite"):
        sqrt_psd(np.diag([1.0, -1e-3]))


def test_singular_inverse_sqrt_rejected():
    with pytest.raises(NotInvertibleError, match="singular"):
        sqrt_and_inv_sqrt(np.diag([1.0, 0.0]))


def test_is_psd_threshold():
    assert is_psd(np.diag([1.0, -0.5e-8]))
    assert not is_psd(np.diag([1.0, -2e-8]))
    assert is_psd(np.zeros((0, 0)))
    assert not is_psd(np.array([[np.nan]]))


def test_shape_and_finiteness_errors():
    with pytest.raises(DimensionError):
        sym_eig(np.ones((2, 3)))
    with pytest.raises(InvalidInputError):
        sym_eig(np.array([[np.inf]]))


def test_eigenvalues_invariant_under_rotation():
    rng = np.random.default_rng(7)
    m = random_pd(rng, 5)
    r = random_orthogonal(rng, 5)
    np.testing.assert_allclose(sym_eig(r @ m @ r.T).eigenvalues, sym_eig(m).eigenvalues, rtol=1e-12)
