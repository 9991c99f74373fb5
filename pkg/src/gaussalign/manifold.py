"""Riemannian optimizers used by the IGW and multimarginal solvers.

Two manifolds are covered:

* the Stiefel manifold ``St(d1, d2) = {C : C^T C = I}``, searched by
  Riemannian gradient ascent with a QR retraction (IGW ``gamma`` problem);
* the block-Gram manifold ``{U = [U_1; ...; U_p] : U_i U_i^T = Sigma_i}``,
  searched by a Riemannian trust-region method with a truncated-CG inner
  solver (Burer-Monteiro factorization of multimarginal OT).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse.linalg as spla

from . import kernels
from .errors import ConstraintError, DimensionError, NotInvertibleError
from .spectra import CLAMP_RTOL, symmetrize

STIEFEL_FEAS_TOL = 1e-10
BLOCK_FEAS_RTOL = 1e-8
RANK_RTOL = 1e-8
# ambient sizes up to this use a dense Hessian for the curvature estimate
DENSE_HESS_MAX = 600


@dataclass(frozen=True)
class SolverConfig:
    """Settings shared by both solvers.

    The defaults are the Stiefel gradient-ascent settings (50 iterations,
    gradient tolerance 1e-2, four random restarts on top of the identity
    start). Use :meth:`for_rtr` for the trust-region solver.
    """

    max_iters: int = 50
    grad_tol: float = 1e-2
    seed: int = 0
    step_init: float = 1.0
    restarts: int = 4

    def __post_init__(self):
        if self.max_iters < 0 or self.restarts < 0:
            raise ValueError("max_iters and restarts must be non-negative")
        if not (self.grad_tol > 0 and self.step_init > 0):
            raise ValueError("grad_tol and step_init must be positive")

    @classmethod
    def for_rtr(cls, **overrides) -> "SolverConfig":
        base = cls(max_iters=500, grad_tol=1e-6, seed=0, step_init=1.0, restarts=3)
        return replace(base, **overrides)

    def to_dict(self) -> dict:
        return {
            "max_iters": self.max_iters,
            "grad_tol": self.grad_tol,
            "seed": self.seed,
            "step_init": self.step_init,
            "restarts": self.restarts,
        }


# -- Stiefel manifold -------------------------------------------------------


def stiefel_check(c: np.ndarray, tol: float = STIEFEL_FEAS_TOL) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] < c.shape[1]:
        raise ConstraintError(f"Stiefel point must be d1 x d2 with d1 >= d2, got {c.shape}")
    err = np.linalg.norm(c.T @ c - np.eye(c.shape[1]))
    if not err <= tol:
        raise ConstraintError(f"point is off the Stiefel manifold (||C^T C - I|| = {err:.2e})")
    return c


def stiefel_project(c: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Riemannian gradient from a Euclidean one: ``G - C sym(C^T G)``."""
    return g - 0.5 * c @ (g.T @ c + c.T @ g)


def qr_retract(c: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Q factor of ``C + V`` with the diagonal of R made positive."""
    q, r = np.linalg.qr(c + v)
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    return q * s


def random_stiefel(d1: int, d2: int, rng: np.random.Generator) -> np.ndarray:
    return qr_retract(np.zeros((d1, d2)), rng.standard_normal((d1, d2)))


@dataclass
class RgdResult:
    point: np.ndarray
    value: float
    trace: list
    iterations: int
    grad_norm: float
    converged: bool


def rgd_maximize(
    f: Callable[[np.ndarray], float],
    egrad: Callable[[np.ndarray], np.ndarray],
    init: np.ndarray,
    cfg: SolverConfig = SolverConfig(),
    callback: Optional[Callable] = None,
) -> RgdResult:
    """Maximize ``f`` over the Stiefel manifold by Riemannian gradient ascent.

    Steps are backtracked by halving until the objective does not decrease;
    the trial step persists across iterations and doubles after two
    consecutive first-trial acceptances. Stops when the Riemannian gradient
    norm drops below ``cfg.grad_tol`` or after ``cfg.max_iters`` steps.

    Parameters
    ----------
    f, egrad : callable
        Objective and its Euclidean gradient, both taking a ``d1 x d2`` array.
    init : ndarray
        Feasible starting point.
    cfg : SolverConfig
    callback : callable, optional
        Called as ``callback(iteration, point, value)`` after every accepted step.

    Returns
    -------
    RgdResult
        ``trace`` holds the value at the start and after each accepted step
        and is non-decreasing.
    """
    c = stiefel_check(init).copy()
    val = float(f(c))
    trace = [val]
    step = cfg.step_init
    streak = 0
    gn = float("nan")
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        g = stiefel_project(c, egrad(c))
        gn = float(np.linalg.norm(g))
        if gn < cfg.grad_tol:
            converged = True
            it -= 1
            break
        t = step
        first = True
        cand = None
        for _ in range(60):
            trial = qr_retract(c, t * g)
            tv = float(f(trial))
            if tv >= val:
                cand = trial
                break
            t *= 0.5
            first = False
        if cand is None:
            # no non-decreasing step above round-off: treat as stationary
            it -= 1
            break
        stiefel_check(cand)
        c, val = cand, tv
        trace.append(val)
        if callback is not None:
            callback(it, c, val)
        if first:
            streak += 1
            if streak == 2:
                t *= 2.0
                streak = 0
        else:
            streak = 0
        step = t
    else:
        g = stiefel_project(c, egrad(c))
        gn = float(np.linalg.norm(g))
        converged = gn < cfg.grad_tol
    return RgdResult(c, val, trace, max(it, 0), gn, converged)


# -- block-Gram manifold ----------------------------------------------------


@dataclass
class BlockFactor:
    """Stacked factor ``U = [U_1; ...; U_p]`` stored as a ``(p, d, k)`` array."""

    blocks: np.ndarray

    @property
    def rank_k(self) -> int:
        return self.blocks.shape[2]

    @property
    def stacked(self) -> np.ndarray:
        p, d, k = self.blocks.shape
        return self.blocks.reshape(p * d, k)

    def grams(self) -> np.ndarray:
        return self.blocks @ np.swapaxes(self.blocks, 1, 2)


class BlockGram:
    """The manifold ``{U : U_i U_i^T = Sigma_i}`` for positive definite ``Sigma_i``."""

    def __init__(self, covs):
        covs = np.asarray(covs, dtype=float)
        if covs.ndim != 3 or covs.shape[1] != covs.shape[2]:
            raise DimensionError(f"expected a (p, d, d) stack of covariances, got {covs.shape}")
        covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
        lam, q = np.linalg.eigh(covs)
        for i, w in enumerate(lam):
            if w[-1] <= 0 or w[0] <= CLAMP_RTOL * w[-1]:
                raise NotInvertibleError(
                    f"covariance {i} is not positive definite (smallest eigenvalue {w[0]:.3e})"
                )
        self.covs = covs
        self.q = np.ascontiguousarray(q)
        self.lam = np.ascontiguousarray(lam)
        rt = np.sqrt(lam)
        qt = np.swapaxes(q, 1, 2)
        self.sqrt = (q * rt[:, None, :]) @ qt
        self.inv_sqrt = (q / rt[:, None, :]) @ qt
        self.p, self.d = covs.shape[0], covs.shape[1]

    def feasibility_error(self, u: np.ndarray) -> float:
        gram = u @ np.swapaxes(u, 1, 2)
        num = np.linalg.norm(gram - self.covs, axis=(1, 2))
        den = np.linalg.norm(self.covs, axis=(1, 2))
        return float(np.max(num / den))

    def check(self, u: np.ndarray, rtol: float = BLOCK_FEAS_RTOL) -> None:
        if u.ndim != 3 or u.shape[:2] != (self.p, self.d) or u.shape[2] < self.d:
            raise ConstraintError(f"factor shape {u.shape} incompatible with {self.p} blocks of dim {self.d}")
        err = self.feasibility_error(u)
        if not err <= rtol:
            raise ConstraintError(f"factor violates U_i U_i^T = Sigma_i (relative error {err:.2e})")

    def project(self, u, z):
        """Return ``(P_U(z), S)`` with ``S`` the symmetric normal multipliers."""
        return kernels.project_blocks(self.q, self.lam, u, z)

    def retract(self, u, v):
        """``Sigma^{1/2} polar(Sigma^{-1/2} (U + V))`` per block."""
        m = self.inv_sqrt @ (u + v)
        a, _, bt = np.linalg.svd(m, full_matrices=False)
        return self.sqrt @ (a @ bt)

    def random_point(self, k: int, rng: np.random.Generator) -> np.ndarray:
        if k < self.d:
            raise DimensionError(f"rank k={k} below dimension d={self.d}")
        w = np.empty((self.p, self.d, k))
        for i in range(self.p):
            g = rng.standard_normal((k, k))
            q, r = np.linalg.qr(g)
            q = q * np.sign(np.diag(r))
            w[i] = q[: self.d]
        return self.sqrt @ w

    @staticmethod
    def inner(a, b) -> float:
        return float(np.vdot(a, b))

    def norm(self, a) -> float:
        return math.sqrt(max(self.inner(a, a), 0.0))


class PairwiseTraceCost:
    """``f(U) = -sum_{i<j} tr(U_i U_j^T)`` with Euclidean derivatives."""

    def __init__(self, covs):
        self.covs = np.asarray(covs, dtype=float)

    def cost(self, u) -> float:
        t = u.sum(axis=0)
        return -0.5 * (float(np.vdot(t, t)) - float(np.vdot(u, u)))

    def egrad(self, u):
        return u - u.sum(axis=0)[None]

    def ehess(self, u, v):
        return v - v.sum(axis=0)[None]


@dataclass
class SospReport:
    grad_norm: float
    hess_min_eig_estimate: float
    factor_rank: int
    rank_k: int
    tol: float
    certified_global: bool
    direction: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "grad_norm": self.grad_norm,
            "hess_min_eig_estimate": self.hess_min_eig_estimate,
            "factor_rank": self.factor_rank,
            "rank_k": self.rank_k,
            "tol": self.tol,
            "certified_global": self.certified_global,
        }


def _riemannian_hessian(man: BlockGram, problem, u, s):
    def hess(v):
        return man.project(u, problem.ehess(u, v) - s @ v)[0]

    return hess


def _hess_min_eig(man: BlockGram, hess, u, seed: int):
    """Smallest eigenpair of ``P Hess P`` acting on the ambient space.

    Small problems use the dense matrix; larger ones run Lanczos from a
    seeded start vector.
    """
    shape = u.shape
    n = u.size

    def matvec(x):
        v = man.project(u, np.asarray(x, dtype=float).reshape(shape))[0]
        return hess(v).reshape(-1)

    if n <= DENSE_HESS_MAX:
        h = np.empty((n, n))
        eye = np.eye(n)
        for j in range(n):
            h[:, j] = matvec(eye[j])
        w, vecs = np.linalg.eigh(symmetrize(h))
        return float(w[0]), vecs[:, 0].reshape(shape)
    rng = np.random.default_rng(seed)
    op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    try:
        w, vecs = spla.eigsh(op, k=1, which="SA", v0=rng.standard_normal(n), tol=1e-10, maxiter=20 * n)
    except spla.ArpackNoConvergence as exc:
        if len(exc.eigenvalues) == 0:
            raise
        w, vecs = exc.eigenvalues, exc.eigenvectors
    return float(w[0]), vecs[:, 0].reshape(shape)


def factor_rank(u: np.ndarray, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(u.reshape(-1, u.shape[-1]), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def check_sosp(problem, point: BlockFactor, tol: float = 1e-6, seed: int = 0) -> SospReport:
    """Second-order stationarity and rank-deficiency certificate.

    Parameters
    ----------
    problem : PairwiseTraceCost
        Supplies the covariances and the Euclidean derivatives.
    point : BlockFactor
        Feasible factor.
    tol : float
        Threshold for the gradient norm and for negative curvature.
    seed : int
        Seed of the iterative eigenvalue estimate.

    Returns
    -------
    SospReport
        ``certified_global`` holds when the gradient norm is at most ``tol``,
        the smallest Hessian eigenvalue estimate is at least ``-tol`` and the
        stacked factor is rank-deficient (numerical rank below ``k`` at
        singular-value threshold ``1e-8 * sigma_max``).
    """
    man = BlockGram(problem.covs)
    u = point.blocks
    g, s = man.project(u, problem.egrad(u))
    gn = man.norm(g)
    lam_min, vec = _hess_min_eig(man, _riemannian_hessian(man, problem, u, s), u, seed)
    rank = factor_rank(u)
    k = u.shape[2]
    ok = gn <= tol and lam_min >= -tol and rank < k
    return SospReport(gn, lam_min, rank, k, tol, bool(ok), vec)


def _tcg(man, hess, u, grad, delta, kappa=0.1, theta=1.0):
    """Steihaug-Toint truncated CG for ``min <g, e> + 0.5 <e, H e>``, ``||e|| <= delta``."""
    eta = np.zeros_like(grad)
    heta = np.zeros_like(grad)
    r = grad.copy()
    r_r = man.inner(r, r)
    norm_r0 = math.sqrt(r_r)
    d = -r
    e_pe = 0.0
    e_pd = 0.0
    d_pd = r_r
    max_inner = max(1, grad.size)
    for _ in range(max_inner):
        hd = hess(d)
        d_hd = man.inner(d, hd)
        alpha = r_r / d_hd if d_hd != 0 else np.inf
        e_pe_new = e_pe + 2.0 * alpha * e_pd + alpha * alpha * d_pd
        if d_hd <= 0 or e_pe_new >= delta * delta:
            tau = (-e_pd + math.sqrt(max(e_pd * e_pd + d_pd * (delta * delta - e_pe), 0.0))) / d_pd
            eta = eta + tau * d
            heta = heta + tau * hd
            return eta, heta, True
        eta = eta + alpha * d
        heta = heta + alpha * hd
        e_pe = e_pe_new
        r = man.project(u, r + alpha * hd)[0]
        r_r_new = man.inner(r, r)
        if math.sqrt(r_r_new) <= norm_r0 * min(norm_r0**theta, kappa):
            break
        beta = r_r_new / r_r
        r_r = r_r_new
        d = man.project(u, -r + beta * d)[0]
        e_pd = beta * (e_pd + alpha * d_pd)
        d_pd = r_r + beta * beta * d_pd
    return eta, heta, False


@dataclass
class RtrResult:
    factor: BlockFactor
    value: float
    report: SospReport
    iterations: int
    escapes: int
    history: list


def rtr_minimize(
    problem,
    init: BlockFactor,
    cfg: Optional[SolverConfig] = None,
    callback: Optional[Callable] = None,
) -> RtrResult:
    """Riemannian trust-region minimization on the block-Gram manifold.

    Runs until the Riemannian gradient norm is at most ``cfg.grad_tol``, then
    certifies with :func:`check_sosp`. If the Hessian shows curvature below
    ``-cfg.grad_tol`` the iterate is pushed along the offending eigenvector and
    the solve resumes (at most ``cfg.restarts`` times). If only the rank test
    fails, the gradient tolerance is tightened and iterations continue, since
    the spurious singular value shrinks with the gradient.

    Parameters
    ----------
    problem : PairwiseTraceCost
    init : BlockFactor
        Feasible starting factor.
    cfg : SolverConfig, optional
        Defaults to :meth:`SolverConfig.for_rtr`. ``step_init`` is the initial
        trust-region radius.
    callback : callable, optional
        ``callback(iteration, blocks, value)`` after every accepted step.
    """
    cfg = cfg or SolverConfig.for_rtr()
    man = BlockGram(problem.covs)
    u = np.array(init.blocks, dtype=float)
    man.check(u)
    fx = problem.cost(u)
    delta_bar = max(2.0 * math.sqrt(float(np.trace(man.covs, axis1=1, axis2=2).sum())), 1e-12)
    delta = min(cfg.step_init, delta_bar)
    tol = cfg.grad_tol
    tol_now = tol
    escapes = 0
    tightenings = 0
    history = [fx]
    report = None
    it = 0
    eps = np.finfo(float).eps
    while it < cfg.max_iters:
        eg = problem.egrad(u)
        g, s = man.project(u, eg)
        gn = man.norm(g)
        if gn <= tol_now:
            report = check_sosp(problem, BlockFactor(u), tol, cfg.seed)
            if report.certified_global:
                break
            if report.hess_min_eig_estimate < -tol and escapes < cfg.restarts:
                u, fx = _escape(man, problem, u, fx, report.direction)
                escapes += 1
                tol_now = tol
                history.append(fx)
                continue
            if report.grad_norm <= tol and report.hess_min_eig_estimate >= -tol and tightenings < 3:
                tightenings += 1
                tol_now = max(tol_now * 1e-3, 1e-15 * max(1.0, abs(fx)))
                if gn <= tol_now:
                    break
                continue
            break
        it += 1
        hess = _riemannian_hessian(man, problem, u, s)
        eta, heta, _ = _tcg(man, hess, u, g, delta)
        norm_eta = man.norm(eta)
        u_new = man.retract(u, eta)
        f_new = problem.cost(u_new)
        model_dec = -(man.inner(g, eta) + 0.5 * man.inner(eta, heta))
        reg = 1e3 * eps * max(1.0, abs(fx))
        rho = (fx - f_new + reg) / (model_dec + reg)
        if rho < 0.25 or not np.isfinite(rho):
            delta *= 0.25
        elif rho > 0.75 and norm_eta >= 0.99 * delta:
            delta = min(2.0 * delta, delta_bar)
        if rho > 0.1 and np.isfinite(f_new):
            man.check(u_new)
            u, fx = u_new, f_new
            history.append(fx)
            if callback is not None:
                callback(it, u, fx)
        report = None
    if report is None:
        report = check_sosp(problem, BlockFactor(u), tol, cfg.seed)
    return RtrResult(BlockFactor(u), fx, report, it, escapes, history)


def _escape(man, problem, u, fx, direction):
    v = man.project(u, direction)[0]
    nv = man.norm(v)
    if nv == 0:
        return u, fx
    v = v / nv
    t = math.sqrt(float(np.trace(man.covs, axis1=1, axis2=2).mean()))
    for _ in range(40):
        for sgn in (1.0, -1.0):
            cand = man.retract(u, sgn * t * v)
            fc = problem.cost(cand)
            if fc < fx:
                return cand, fc
        t *= 0.5
    return u, fx


def canonical_factor(u: np.ndarray) -> np.ndarray:
    """Representative of ``U`` modulo right orthogonal action.

    Returns ``U Q`` where ``U^T = Q R`` with non-negative ``diag(R)``; the
    result is lower trapezoidal.
    """
    p, d, k = u.shape
    flat = u.reshape(p * d, k)
    q, r = np.linalg.qr(flat.T, mode="complete")
    m = min(r.shape)
    s = np.ones(k)
    sg = np.sign(np.diag(r)[:m])
    sg[sg == 0] = 1.0
    s[:m] = sg
    return (flat @ (q * s)).reshape(p, d, k)


