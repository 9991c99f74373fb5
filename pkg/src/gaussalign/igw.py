"""Inner-product Gromov-Wasserstein (IGW) alignment between Gaussians.

The IGW distance between N(m1, S1) and N(m2, S2) reduces to maximizing

    gamma(C) = tr(L1 C L2 C^T) + 2 <eta1, C eta2>

over ``C`` with orthonormal columns, where ``L_i`` are the sorted covariance
spectra and ``eta_i = L_i^{1/2} Q_i^T m_i``. Everything here consumes the
:class:`~gaussalign.gaussian.SpectralForm` of the inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, UnsupportedInputError
from .gaussian import Gaussian, SpectralForm, WeightedCollection, pad_vector, spectral_form
from .manifold import SolverConfig, random_stiefel, rgd_maximize, stiefel_check
from .spectra import CLAMP_RTOL, is_psd
from .transport import AffineMap

COCENTER_TOL = 1e-10
CENTER_ATOL = 1e-12
SANDWICH_SLACK = 1e-9


@dataclass(frozen=True)
class IgwBounds:
    """Analytic bounds on the squared IGW distance.

    ``lower_sq = xi - 4 |eta1| |eta2|`` and ``upper_sq = xi - 4 <eta1, eta2>``.
    """

    xi: float
    lower_sq: float
    upper_sq: float
    lower: float
    upper: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("xi", "lower_sq", "upper_sq", "lower", "upper")}


@dataclass
class GammaSolution:
    """Best Stiefel point found for the gamma problem.

    ``c`` has shape ``(max(d1, d2), min(d1, d2))``; ``swapped`` records that
    the second input had the larger dimension and took the first slot.
    """

    c: np.ndarray
    gamma: float
    trace: list
    iterations: int
    converged: bool
    swapped: bool = False


@dataclass(frozen=True, eq=False)
class GaussianCoupling:
    mean: np.ndarray
    cov: np.ndarray
    cross: np.ndarray
    map: AffineMap

    @property
    def joint(self) -> Gaussian:
        return Gaussian(self.mean, self.cov)


def _padded_spectra(s1: SpectralForm, s2: SpectralForm):
    n = max(s1.dim, s2.dim)
    return pad_vector(s1.lambdas, n), pad_vector(s2.lambdas, n)


def _padded_eta(s1: SpectralForm, s2: SpectralForm):
    n = max(s1.dim, s2.dim)
    return pad_vector(s1.eta, n), pad_vector(s2.eta, n)


def gbw_distance(lam1: np.ndarray, lam2: np.ndarray) -> float:
    """l2 distance between non-increasing spectra, zero-padded to equal length."""
    n = max(lam1.shape[0], lam2.shape[0])
    diff = pad_vector(lam1, n) - pad_vector(lam2, n)
    return float(math.sqrt(diff @ diff))


def _ordered(s1: SpectralForm, s2: SpectralForm):
    if s1.dim >= s2.dim:
        return s1, s2, False
    return s2, s1, True


def gamma_objective(s1: SpectralForm, s2: SpectralForm, c) -> float:
    """``tr(L1 C L2 C^T) + 2 <eta1, C eta2>`` for ``C`` of shape ``(d1, d2)``.

    If ``s1`` has the smaller dimension the arguments are swapped, so ``c``
    must then have shape ``(d2, d1)``.
    """
    a, b, _ = _ordered(s1, s2)
    c = np.asarray(c, dtype=float)
    if c.shape != (a.dim, b.dim):
        raise DimensionError(f"C must have shape {(a.dim, b.dim)}, got {c.shape}")
    return _gamma(a, b, c)


def _gamma(a: SpectralForm, b: SpectralForm, c: np.ndarray) -> float:
    quad = float(np.sum((a.lambdas[:, None] * c * b.lambdas[None, :]) * c))
    return quad + 2.0 * float(a.eta @ (c @ b.eta))


def _gamma_egrad(a: SpectralForm, b: SpectralForm, c: np.ndarray) -> np.ndarray:
    return 2.0 * (a.lambdas[:, None] * c * b.lambdas[None, :]) + 2.0 * np.outer(a.eta, b.eta)


def igw_constant(s1: SpectralForm, s2: SpectralForm) -> float:
    """The C-independent part of IGW^2 (before subtracting ``2 gamma``)."""
    mm = float(s1.m_tilde @ s1.m_tilde) - float(s2.m_tilde @ s2.m_tilde)
    return (
        float(s1.lambdas @ s1.lambdas)
        + float(s2.lambdas @ s2.lambdas)
        + 2.0 * float(s1.eta @ s1.eta)
        + 2.0 * float(s2.eta @ s2.eta)
        + mm * mm
    )


def _bounds_from_spectra(s1: SpectralForm, s2: SpectralForm) -> IgwBounds:
    l1, l2 = _padded_spectra(s1, s2)
    e1, e2 = _padded_eta(s1, s2)
    mm = float(s1.m_tilde @ s1.m_tilde) - float(s2.m_tilde @ s2.m_tilde)
    dl = l1 - l2
    xi = float(dl @ dl) + 2.0 * float(e1 @ e1) + 2.0 * float(e2 @ e2) + mm * mm
    upper_sq = xi - 4.0 * float(e1 @ e2)
    # via the clamped gap so that lower_sq <= upper_sq survives round-off
    gap = max(float(np.linalg.norm(e1)) * float(np.linalg.norm(e2)) - float(e1 @ e2), 0.0)
    lower_sq = upper_sq - 4.0 * gap
    return IgwBounds(
        xi,
        lower_sq,
        upper_sq,
        math.sqrt(max(lower_sq, 0.0)),
        math.sqrt(max(upper_sq, 0.0)),
    )


def igw_bounds(g1: Gaussian, g2: Gaussian) -> IgwBounds:
    """Analytic lower and upper bounds on IGW(g1, g2).

    Spectra and moment vectors are zero-padded to a common length, so the
    inputs may live in different dimensions. The two bounds differ by the
    Cauchy-Schwarz gap ``4 (|eta1| |eta2| - <eta1, eta2>)``.
    """
    return _bounds_from_spectra(spectral_form(g1), spectral_form(g2))


def _univariate_igw(g1: Gaussian, g2: Gaussian) -> float:
    v1, v2 = float(g1.cov[0, 0]), float(g2.cov[0, 0])
    m1, m2 = float(g1.mean[0]), float(g2.mean[0])
    s1, s2 = math.sqrt(max(v1, 0.0)), math.sqrt(max(v2, 0.0))
    val = (v1 - v2) ** 2 + (m1 * m1 - m2 * m2) ** 2 + 2.0 * (s1 * abs(m1) - s2 * abs(m2)) ** 2
    return math.sqrt(max(val, 0.0))


def is_cocentered(eta1: np.ndarray, eta2: np.ndarray, tol: float = COCENTER_TOL) -> bool:
    """Whether ``eta1 = alpha * eta2`` for some ``alpha >= 0`` (up to ``tol``)."""
    n = max(eta1.shape[0], eta2.shape[0])
    e1, e2 = pad_vector(eta1, n), pad_vector(eta2, n)
    n1, n2 = np.linalg.norm(e1), np.linalg.norm(e2)
    if n1 == 0.0 or n2 == 0.0:
        return True
    return bool(1.0 - float(e1 @ e2) / (n1 * n2) <= tol)


def igw_closed_form(g1: Gaussian, g2: Gaussian) -> Optional[float]:
    """IGW distance when an exact formula applies, else ``None``.

    Cases, tried in order: both centered (sorted-spectrum distance), both
    univariate, and co-centered moment vectors (analytic bounds coincide).
    """
    if g1.is_centered(CENTER_ATOL) and g2.is_centered(CENTER_ATOL):
        s1, s2 = spectral_form(g1), spectral_form(g2)
        return gbw_distance(s1.lambdas, s2.lambdas)
    if g1.dim == 1 and g2.dim == 1:
        return _univariate_igw(g1, g2)
    s1, s2 = spectral_form(g1), spectral_form(g2)
    if is_cocentered(s1.eta, s2.eta):
        return _bounds_from_spectra(s1, s2).lower
    return None


def _initial_points(a: SpectralForm, b: SpectralForm, cfg: SolverConfig):
    d1, d2 = a.dim, b.dim
    # eta entries are non-negative, so the identity frame aligns the linear term
    eye = np.eye(d1, d2)
    inits = [eye]
    if d1 == d2:
        # O(d) has two components and gradient ascent cannot cross between them
        flip = eye.copy()
        flip[-1, -1] = -1.0
        inits.append(flip)
    rng = np.random.default_rng(cfg.seed)
    inits.extend(random_stiefel(d1, d2, rng) for _ in range(cfg.restarts))
    return inits


def igw_distance_rgd(g1: Gaussian, g2: Gaussian, cfg: SolverConfig = SolverConfig()):
    """IGW distance estimate from Riemannian gradient ascent on gamma.

    Starts from the identity frame, a reflection when both dimensions agree,
    and ``cfg.restarts`` seeded random frames; the best gamma is kept.

    Returns
    -------
    distance : float
        Lies in ``[bounds.lower, bounds.upper]``. Any feasible frame gives a
        valid upper bound, so this is always an upper bound on the true value.
    solution : GammaSolution
    bounds : IgwBounds
    """
    s1, s2 = spectral_form(g1), spectral_form(g2)
    a, b, swapped = _ordered(s1, s2)
    bounds = _bounds_from_spectra(s1, s2)
    const = igw_constant(a, b)

    def f(c):
        return _gamma(a, b, c)

    def egrad(c):
        return _gamma_egrad(a, b, c)

    best = None
    for init in _initial_points(a, b, cfg):
        res = rgd_maximize(f, egrad, init, cfg)
        if best is None or res.value > best.value:
            best = res
    dist_sq = const - 2.0 * best.value
    slack = SANDWICH_SLACK * max(1.0, bounds.xi)
    if not (bounds.lower_sq - slack <= dist_sq <= bounds.upper_sq + slack):
        raise AssertionError(
            f"IGW^2 estimate {dist_sq!r} outside analytic bounds "
            f"[{bounds.lower_sq!r}, {bounds.upper_sq!r}]"
        )
    # the true value lies in the interval; clip round-off only
    dist = min(max(math.sqrt(max(dist_sq, 0.0)), bounds.lower), bounds.upper)
    sol = GammaSolution(best.point, best.value, best.trace, best.iterations, best.converged, swapped)
    return dist, sol, bounds


def igw_from_frame(g1: Gaussian, g2: Gaussian, c) -> float:
    """IGW cost of the coupling induced by a feasible frame ``c`` (an upper bound)."""
    s1, s2 = spectral_form(g1), spectral_form(g2)
    a, b, _ = _ordered(s1, s2)
    c = stiefel_check(c)
    if c.shape != (a.dim, b.dim):
        raise DimensionError(f"frame must have shape {(a.dim, b.dim)}, got {c.shape}")
    return math.sqrt(max(igw_constant(a, b) - 2.0 * _gamma(a, b, c), 0.0))


def igw_coupling(g1: Gaussian, g2: Gaussian, c) -> GaussianCoupling:
    """Gaussian coupling and map induced by the frame ``c``.

    The cross-covariance is ``Q1 L1^{1/2} C L2^{1/2} Q2^T``. The map is
    ``T(x) = m2 + Q2 L2^{1/2} C^T (L1^{1/2})^+ Q1^T (x - m1)`` with the
    pseudo-inverse taken on eigenvalues above ``1e-10 * lambda_max``.
    Requires ``dim(g1) >= dim(g2)`` and ``c`` of shape ``(d1, d2)``.
    """
    if g1.dim < g2.dim:
        raise DimensionError("igw_coupling expects dim(g1) >= dim(g2); swap the inputs")
    c = np.asarray(c, dtype=float)
    if c.shape != (g1.dim, g2.dim):
        raise DimensionError(f"C must have shape {(g1.dim, g2.dim)}, got {c.shape}")
    stiefel_check(c)
    s1, s2 = spectral_form(g1), spectral_form(g2)
    r1 = np.sqrt(s1.lambdas)
    r2 = np.sqrt(s2.lambdas)
    a1 = s1.q * r1
    cross = a1 @ c @ (s2.q * r2).T
    lam_max = s1.lambdas[0] if s1.dim else 0.0
    r1_pinv = np.where(s1.lambdas > CLAMP_RTOL * lam_max, 1.0 / np.where(r1 > 0, r1, 1.0), 0.0)
    mat = (s2.q * r2) @ c.T @ (r1_pinv[:, None] * s1.q.T)
    d1 = g1.dim
    cov = np.zeros((d1 + g2.dim, d1 + g2.dim))
    cov[:d1, :d1] = g1.cov
    cov[d1:, d1:] = g2.cov
    cov[:d1, d1:] = cross
    cov[d1:, :d1] = cross.T
    if not is_psd(cov, 1e-8):
        raise AssertionError("coupling covariance is not PSD")
    tmap = AffineMap(mat, g1.mean.copy(), g2.mean.copy())
    return GaussianCoupling(np.concatenate([g1.mean, g2.mean]), cov, cross, tmap)


def igw_barycenter(col: WeightedCollection, d_target: Optional[int] = None) -> Gaussian:
    """Weighted IGW barycenter of centered Gaussians.

    The barycenter is ``N(0, diag(lbar))`` with ``lbar_k`` the weighted mean of
    the ``k``-th largest eigenvalues (zero beyond each input's dimension).
    ``d_target`` defaults to the largest input dimension, which attains the
    unrestricted optimum.

    Raises
    ------
    UnsupportedInputError
        If any input has a non-zero mean.
    """
    gs = col.gaussians
    for i, g in enumerate(gs):
        if not g.is_centered(CENTER_ATOL):
            raise UnsupportedInputError(
                f"IGW barycenter formula covers centered Gaussians only (input {i} has mean norm "
                f"{np.linalg.norm(g.mean):.3e})"
            )
    if d_target is None:
        d_target = max(g.dim for g in gs)
    if d_target < 1:
        raise DimensionError("d_target must be positive")
    lbar = np.zeros(d_target)
    for w, g in zip(col.weights, gs):
        lam = spectral_form(g).lambdas[:d_target]
        lbar[: lam.shape[0]] += w * lam
    return Gaussian(np.zeros(d_target), np.diag(lbar))


def igw_barycenter_objective(lbar: np.ndarray, col: WeightedCollection) -> float:
    """``sum_i w_i GBW(diag(lbar), Sigma_i)^2``."""
    total = 0.0
    for w, g in zip(col.weights, col.gaussians):
        total += w * gbw_distance(lbar, spectral_form(g).lambdas) ** 2
    return total
