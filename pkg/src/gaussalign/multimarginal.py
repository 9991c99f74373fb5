"""Multimarginal couplings of Gaussians.

Two solvers share the :class:`MultiCoupling` result type: the closed-form
multimarginal IGW coupling of centered Gaussians, and multimarginal OT with
pairwise quadratic costs solved through a Burer-Monteiro factorization
``Sigma = U U^T`` of the joint covariance, with ``U_i U_i^T = Sigma_i``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DimensionError,
    EmptyInputError,
    InvalidInputError,
    UncertifiedWarning,
    UnsupportedInputError,
)
from .gaussian import Gaussian, pad_to_dim, spectral_form
from .manifold import (
    BlockFactor,
    BlockGram,
    PairwiseTraceCost,
    SolverConfig,
    SospReport,
    canonical_factor,
    rtr_minimize,
)
from .spectra import sqrt_psd, symmetrize
from .transport import bw_map

CENTER_ATOL = 1e-12


@dataclass(eq=False)
class MultiCoupling:
    """Gaussian coupling of ``p`` marginals in a common dimension ``d``.

    Attributes
    ----------
    means : ndarray, shape (p, d)
    blocks : ndarray, shape (p, p, d, d)
        ``blocks[i, j]`` is the cross-covariance ``C_ij``; diagonal blocks are
        the marginal covariances.
    cost : float
        Total pairwise cost of the coupling.
    objective : float
        ``sum_{i<j} tr(C_ij)``, the quantity the OT solver maximizes.
    factor : BlockFactor or None
        ``U`` with ``C_ij = U_i U_j^T`` when known.
    certificate : SospReport or None
    status : str
        ``"closed-form"``, ``"feasible"``, ``"certified"`` or ``"uncertified"``.
    """

    means: np.ndarray
    blocks: np.ndarray
    cost: float
    objective: float
    factor: Optional[BlockFactor] = None
    certificate: Optional[SospReport] = None
    status: str = "feasible"

    @property
    def p(self) -> int:
        return self.blocks.shape[0]

    @property
    def d(self) -> int:
        return self.blocks.shape[2]

    @property
    def stacked_cov(self) -> np.ndarray:
        p, _, d, _ = self.blocks.shape
        return self.blocks.transpose(0, 2, 1, 3).reshape(p * d, p * d)

    def marginal(self, i: int) -> Gaussian:
        return Gaussian(self.means[i], self.blocks[i, i])

    def summary(self) -> dict:
        out = {
            "p": self.p,
            "d": self.d,
            "cost": self.cost,
            "objective": self.objective,
            "status": self.status,
        }
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_dict()
        return out


def _check_list(gaussians) -> list:
    gs = list(gaussians)
    if not gs:
        raise EmptyInputError("need at least one Gaussian")
    return gs


def _pair_terms(blocks: np.ndarray, means: np.ndarray):
    """Return ``(cost, objective)`` for the pairwise quadratic cost."""
    p = blocks.shape[0]
    traces = np.trace(blocks, axis1=2, axis2=3)
    cost = 0.0
    obj = 0.0
    for i in range(p):
        for j in range(i + 1, p):
            dm = means[i] - means[j]
            cost += float(dm @ dm) + traces[i, i] + traces[j, j] - 2.0 * traces[i, j]
            obj += traces[i, j]
    return float(cost), float(obj)


def _blocks_from_factor(u: np.ndarray, covs: np.ndarray) -> np.ndarray:
    blocks = np.einsum("iak,jbk->ijab", u, u)
    for i in range(u.shape[0]):
        blocks[i, i] = covs[i]
    return blocks


def mm_igw_closed_form(gaussians: Sequence[Gaussian]) -> MultiCoupling:
    """Optimal multimarginal IGW coupling of centered Gaussians.

    Inputs of lower dimension are zero-padded to the largest one. The
    coupling uses ``C_ij = Q_i L_i^{1/2} L_j^{1/2} Q_j^T``, which attains
    every pairwise optimum at once, so the cost is the sum of pairwise
    squared sorted-spectrum distances.

    Raises
    ------
    UnsupportedInputError
        If any input has a non-zero mean.
    """
    gs = _check_list(gaussians)
    for i, g in enumerate(gs):
        if not g.is_centered(CENTER_ATOL):
            raise UnsupportedInputError(
                f"multimarginal IGW closed form covers centered Gaussians only (input {i})"
            )
    d = max(g.dim for g in gs)
    gs = [pad_to_dim(g, d) for g in gs]
    forms = [spectral_form(g) for g in gs]
    u = np.stack([f.q * np.sqrt(f.lambdas) for f in forms])
    covs = np.stack([g.cov for g in gs])
    blocks = _blocks_from_factor(u, covs)
    p = len(gs)
    sq = np.einsum("ijab,ijab->ij", blocks, blocks)
    cost = 0.0
    for i in range(p):
        for j in range(i + 1, p):
            cost += sq[i, i] + sq[j, j] - 2.0 * sq[i, j]
    _, obj = _pair_terms(blocks, np.zeros((p, d)))
    return MultiCoupling(np.zeros((p, d)), blocks, float(max(cost, 0.0)), obj, BlockFactor(u), None, "closed-form")


def _common_stack(gs: list):
    d = gs[0].dim
    for g in gs:
        if g.dim != d:
            raise DimensionError("multimarginal OT inputs must share a dimension")
    return d, np.stack([g.mean for g in gs]), np.stack([g.cov for g in gs])


def mm_ot_solve(
    gaussians: Sequence[Gaussian],
    cfg: Optional[SolverConfig] = None,
    k: Optional[int] = None,
) -> MultiCoupling:
    """Multimarginal OT with pairwise quadratic costs via Burer-Monteiro.

    Minimizes ``-sum_{i<j} tr(U_i U_j^T)`` over factors with
    ``U_i U_i^T = Sigma_i`` by Riemannian trust regions. With ``k = d + 1``
    any second-order stationary point that is rank-deficient is a global
    optimum; :func:`~gaussalign.manifold.check_sosp` verifies this.

    Parameters
    ----------
    gaussians : sequence of Gaussian
        Positive definite covariances of a common dimension.
    cfg : SolverConfig, optional
        Defaults to :meth:`SolverConfig.for_rtr`. ``cfg.restarts`` bounds both
        the saddle escapes within a run and the number of extra runs from
        fresh random factors if a run ends uncertified.
    k : int, optional
        Factor width, ``d + 1`` by default.

    Returns
    -------
    MultiCoupling
        Status ``"certified"`` or ``"uncertified"``. An uncertified result is
        the best feasible coupling found and also raises
        :class:`~gaussalign.errors.UncertifiedWarning`.
    """
    gs = _check_list(gaussians)
    cfg = cfg or SolverConfig.for_rtr()
    d, means, covs = _common_stack(gs)
    k = d + 1 if k is None else int(k)
    man = BlockGram(covs)
    problem = PairwiseTraceCost(covs)
    rng = np.random.default_rng(cfg.seed)
    best = None
    for _ in range(cfg.restarts + 1):
        init = BlockFactor(man.random_point(k, rng))
        res = rtr_minimize(problem, init, cfg)
        if best is None or (res.report.certified_global, -res.value) > (
            best.report.certified_global,
            -best.value,
        ):
            best = res
        if best.report.certified_global:
            break
    u = canonical_factor(best.factor.blocks)
    blocks = _blocks_from_factor(u, covs)
    cost, obj = _pair_terms(blocks, means)
    status = "certified" if best.report.certified_global else "uncertified"
    if status == "uncertified":
        rep = best.report
        warnings.warn(
            f"multimarginal OT solution not certified globally optimal (grad norm "
            f"{rep.grad_norm:.2e}, min Hessian eig {rep.hess_min_eig_estimate:.2e}, "
            f"factor rank {rep.factor_rank}/{rep.rank_k})",
            UncertifiedWarning,
            stacklevel=2,
        )
    return MultiCoupling(means, blocks, cost, obj, BlockFactor(u), best.report, status)


def glued_coupling(gaussians: Sequence[Gaussian]) -> MultiCoupling:
    """Feasible coupling gluing the pairwise OT maps out of the first marginal.

    With ``A_i`` the optimal map from marginal 1 to marginal ``i``, the
    coupling is the law of ``(A_1 X, ..., A_p X)`` with ``X ~ N(0, Sigma_1)``.
    Its objective lower-bounds the optimal one.
    """
    gs = _check_list(gaussians)
    d, means, covs = _common_stack(gs)
    r1 = sqrt_psd(covs[0])
    u = np.stack([bw_map(gs[0], g).matrix @ r1 for g in gs])
    u[0] = r1
    blocks = _blocks_from_factor(u, covs)
    cost, obj = _pair_terms(blocks, means)
    return MultiCoupling(means, blocks, cost, obj, BlockFactor(u), None, "feasible")


def barycenter_from_mm(coupling: MultiCoupling, weights=None) -> Gaussian:
    """Gaussian barycenter read off a multimarginal coupling.

    The law of ``sum_i w_i X_i`` under the coupling: mean ``sum_i w_i m_i``
    and covariance ``(sum_i w_i U_i)(sum_i w_i U_i)^T`` from the factor, or
    ``sum_{i,j} w_i w_j C_ij`` from the blocks when no factor is stored.
    For an optimal OT coupling this is the weighted 2-Wasserstein barycenter.
    """
    p = coupling.p
    if weights is None:
        w = np.full(p, 1.0 / p)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != p:
        raise InvalidInputError(f"{w.shape[0]} weights for {p} marginals")
    if np.any(~np.isfinite(w)) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise InvalidInputError("weights must be non-negative and sum to 1")
    mean = w @ coupling.means
    if coupling.factor is not None:
        v = np.einsum("i,iak->ak", w, coupling.factor.blocks)
        cov = v @ v.T
    else:
        cov = np.einsum("i,j,ijab->ab", w, w, coupling.blocks)
    return Gaussian(mean, symmetrize(cov))
