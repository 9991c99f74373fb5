"""Symmetric-matrix kernels: eigendecomposition, PSD square roots, PSD tests.

Every other module goes through these helpers so that eigenvector bases are
canonical (reproducible across runs) and round-off negative eigenvalues are
handled the same way everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, InvalidInputError, NotInvertibleError, NotPSDError

# eigenvalues in [-CLAMP_RTOL * lambda_max, 0) are round-off and become 0
CLAMP_RTOL = 1e-10
# relative gap below which neighbouring eigenvalues are treated as tied
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues non-increasing.

    Attributes
    ----------
    eigenvalues : ndarray, shape (d,)
    eigenvectors : ndarray, shape (d, d)
        Orthogonal; column ``k`` pairs with ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return symmetrize((q * self.eigenvalues) @ q.T)


def as_square(m, name="matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return m


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip columns so the first largest-magnitude entry of each is positive."""
    if vecs.size == 0:
        return vecs
    mag = np.abs(vecs)
    # first index within round-off of the column maximum, so near-ties resolve
    # the same way regardless of last-bit noise
    near_max = mag >= mag.max(axis=0, keepdims=True) * (1 - 1e-12)
    idx = np.argmax(near_max, axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _canonical_basis(block: np.ndarray) -> np.ndarray:
    """Basis of span(block) built from projected coordinate axes.

    If the span is itself spanned by coordinate axes the result is exactly
    those axes, in index order.
    """
    g = block.shape[1]
    proj = block @ block.T
    _, _, piv = scipy.linalg.qr(proj, pivoting=True, mode="economic")
    cols = np.sort(piv[:g])
    q, r = np.linalg.qr(proj[:, cols])
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def sym_eig(m) -> SpectralDecomposition:
    """Eigendecomposition of a symmetric matrix with a canonical basis.

    Eigenvalues are sorted non-increasing. Within groups of tied eigenvalues
    the basis is rebuilt from the coordinate axes (identity-preferring), and
    every eigenvector is sign-fixed so its largest-magnitude entry is positive.

    Parameters
    ----------
    m : array-like, shape (d, d)
        Symmetric matrix; it is symmetrized before decomposition.

    Returns
    -------
    SpectralDecomposition
    """
    m = symmetrize(as_square(m))
    w, v = np.linalg.eigh(m)
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    d = w.shape[0]
    scale = max(float(np.max(np.abs(w))) if d else 0.0, np.finfo(float).tiny)
    start = 0
    while start < d:
        stop = start + 1
        while stop < d and w[start] - w[stop] <= TIE_RTOL * scale:
            stop += 1
        if stop - start > 1:
            v[:, start:stop] = _canonical_basis(v[:, start:stop])
            w[start:stop] = w[start:stop].mean()
        start = stop
    return SpectralDecomposition(w, _fix_signs(v))


def _checked_eigh(m, what="matrix"):
    m = symmetrize(as_square(m, what))
    w, v = np.linalg.eigh(m)
    lam_max = max(float(w[-1]), 0.0) if w.size else 0.0
    if w.size and w[0] < -CLAMP_RTOL * lam_max:
        raise NotPSDError(
            f"{what} is not positive semidefinite: eigenvalue {w[0]:.3e} "
            f"below -{CLAMP_RTOL:g} * {lam_max:.3e}"
        )
    return np.clip(w, 0.0, None), v


def clamped_eigvalsh(m) -> np.ndarray:
    """Non-increasing eigenvalues of a PSD matrix with round-off clamped to 0."""
    w, _ = _checked_eigh(m)
    return w[::-1].copy()


def sqrt_psd(m) -> np.ndarray:
    """Symmetric PSD square root.

    Raises
    ------
    NotPSDError
        If an eigenvalue lies below ``-1e-10 * lambda_max``.
    """
    w, v = _checked_eigh(m)
    return symmetrize((v * np.sqrt(w)) @ v.T)


def sqrt_and_inv_sqrt(m, what="covariance"):
    """Return ``(M^{1/2}, M^{-1/2})`` for a positive definite ``M``.

    Raises
    ------
    NotInvertibleError
        If the smallest eigenvalue is at most ``1e-10 * lambda_max``.
    """
    w, v = _checked_eigh(m, what)
    lam_max = float(w[-1]) if w.size else 0.0
    if w.size and (lam_max <= 0.0 or w[0] <= CLAMP_RTOL * lam_max):
        raise NotInvertibleError(
            f"{what} is singular: smallest eigenvalue {w[0]:.3e} "
            f"(largest {lam_max:.3e})"
        )
    r = np.sqrt(w)
    return symmetrize((v * r) @ v.T), symmetrize((v / r) @ v.T)


def is_psd(m, tol: float = 1e-8) -> bool:
    """True iff ``min eig(M) >= -tol * max(1, max eig(M))``."""
    m = symmetrize(np.asarray(m, dtype=float))
    if m.size == 0:
        return True
    if not np.all(np.isfinite(m)):
        return False
    w = np.linalg.eigvalsh(m)
    return bool(w[0] >= -tol * max(1.0, float(w[-1])))
