"""Closed-form quadratic-cost optimal transport between Gaussians."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DimensionError, InvalidInputError
from .gaussian import Gaussian, WeightedCollection
from .spectra import sqrt_and_inv_sqrt, sqrt_psd, symmetrize


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``T(x) = matrix @ (x - pivot) + offset``."""

    matrix: np.ndarray
    pivot: np.ndarray
    offset: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (x - self.pivot) @ self.matrix.T + self.offset

    def push(self, g: Gaussian) -> Gaussian:
        """Pushforward of ``g`` under the map."""
        a = self.matrix
        return Gaussian(self(g.mean), a @ g.cov @ a.T)

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "pivot": self.pivot.tolist(),
            "offset": self.offset.tolist(),
        }


def _same_dim(g1: Gaussian, g2: Gaussian):
    if g1.dim != g2.dim:
        raise DimensionError(f"dimension mismatch: {g1.dim} vs {g2.dim}")


def bw_cross_trace(s1: np.ndarray, s2: np.ndarray) -> float:
    """``tr((S1^{1/2} S2 S1^{1/2})^{1/2})``, the fidelity term."""
    r1 = sqrt_psd(s1)
    return float(np.trace(sqrt_psd(r1 @ s2 @ r1)))


def bw_distance(g1: Gaussian, g2: Gaussian) -> float:
    """2-Wasserstein distance between Gaussians (Bures-Wasserstein formula)."""
    _same_dim(g1, g2)
    dm = g1.mean - g2.mean
    val = float(dm @ dm) + float(np.trace(g1.cov) + np.trace(g2.cov))
    val -= 2.0 * bw_cross_trace(g1.cov, g2.cov)
    return float(np.sqrt(max(val, 0.0)))


def bw_map(g1: Gaussian, g2: Gaussian) -> AffineMap:
    """Optimal transport map from ``g1`` to ``g2``.

    The linear part ``A = S1^{-1/2} (S1^{1/2} S2 S1^{1/2})^{1/2} S1^{-1/2}``
    is symmetric PSD.

    Raises
    ------
    NotInvertibleError
        If the source covariance is singular.
    """
    _same_dim(g1, g2)
    r1, r1_inv = sqrt_and_inv_sqrt(g1.cov, "source covariance")
    mid = sqrt_psd(r1 @ g2.cov @ r1)
    a = symmetrize(r1_inv @ mid @ r1_inv)
    return AffineMap(a, g1.mean.copy(), g2.mean.copy())


def displacement_interpolation(g1: Gaussian, tmap: AffineMap, t: float) -> Gaussian:
    """Law of ``((1 - t) Id + t T)(X)`` for ``X ~ g1``."""
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError(f"t must lie in [0, 1], got {t}")
    if tmap.matrix.shape != (g1.dim, g1.dim):
        raise DimensionError("map and Gaussian dimensions differ")
    m = (1.0 - t) * np.eye(g1.dim) + t * tmap.matrix
    mean = (1.0 - t) * g1.mean + t * tmap(g1.mean)
    return Gaussian(mean, m @ g1.cov @ m.T)


def _barycenter_residual(sigma, covs, weights):
    r = sqrt_psd(sigma)
    avg = sum(w * sqrt_psd(r @ c @ r) for w, c in zip(weights, covs))
    res = np.linalg.norm(sigma - avg) / max(np.linalg.norm(sigma), np.finfo(float).tiny)
    return float(res), symmetrize(avg)


def w2_barycenter_fixed_point(
    col: WeightedCollection, tol: float = 1e-10, max_iters: int = 500
) -> Gaussian:
    """Weighted 2-Wasserstein barycenter by fixed-point iteration.

    Iterates ``S <- S^{-1/2} (sum_i w_i (S^{1/2} S_i S^{1/2})^{1/2})^2 S^{-1/2}``
    from the weighted arithmetic mean of the covariances until the relative
    fixed-point residual ``||S - sum_i w_i (S^{1/2} S_i S^{1/2})^{1/2}||_F``
    is at most ``tol * ||S||_F``.

    Raises
    ------
    ConvergenceError
        After ``max_iters`` iterations without reaching ``tol``.
    """
    gs = col.gaussians
    d = gs[0].dim
    for g in gs:
        if g.dim != d:
            raise DimensionError("barycenter inputs must share a dimension")
        sqrt_and_inv_sqrt(g.cov)  # positive definiteness check
    w = col.weights
    covs = [g.cov for g in gs]
    mean = sum(wi * g.mean for wi, g in zip(w, gs))
    sigma = symmetrize(sum(wi * c for wi, c in zip(w, covs)))
    res = np.inf
    for it in range(max_iters + 1):
        res, avg = _barycenter_residual(sigma, covs, w)
        if res <= tol:
            return Gaussian(mean, sigma)
        if it == max_iters:
            break
        _, r_inv = sqrt_and_inv_sqrt(sigma, "barycenter iterate")
        sigma = symmetrize(r_inv @ avg @ avg @ r_inv)
    raise ConvergenceError(
        f"fixed-point barycenter did not converge in {max_iters} iterations "
        f"(residual {res:.3e})",
        residual=res,
        iterations=max_iters,
    )
