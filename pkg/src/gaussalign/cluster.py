"""Analysis toolkit over collections of Gaussians.

Pairwise IGW distance matrices, k-means++ clustering with IGW-barycenter
centers, classical multidimensional scaling and centered kernel alignment.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import DimensionError, EmptyInputError, InvalidInputError, UnsupportedInputError
from .gaussian import Gaussian, WeightedCollection, pad_vector, spectral_form
from .igw import CENTER_ATOL, igw_barycenter, igw_bounds, igw_closed_form, igw_distance_rgd
from .manifold import SolverConfig
from .spectra import sym_eig, symmetrize

MODES = ("closed", "rgd", "upper", "lower")
KMEANS_MAX_ITERS = 100


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric non-negative matrix with zero diagonal."""

    entries: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise DimensionError(f"distance matrix must be square, got {e.shape}")
        if not np.all(np.isfinite(e)) or np.any(e < 0):
            raise InvalidInputError("distances must be finite and non-negative")
        if np.any(np.diag(e) != 0) or not np.array_equal(e, e.T):
            raise InvalidInputError("distance matrix must be symmetric with zero diagonal")
        e = e.copy()
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(eq=False)
class ClusterResult:
    """Outcome of :func:`kmeans_igw`.

    ``inertia`` is the sum of squared IGW distances to the assigned centers
    and ``history`` its value after every assignment step.
    """

    labels: np.ndarray
    centers: list
    inertia: float
    seed: int
    iterations: int = 0
    history: list = field(default_factory=list)


def _pair_value(gi: Gaussian, gj: Gaussian, mode: str, cfg: SolverConfig, pair) -> float:
    if mode == "closed":
        val = igw_closed_form(gi, gj)
        if val is None:
            raise UnsupportedInputError(
                f"no closed form applies to pair {pair}; use mode 'rgd' or a bound"
            )
        return val
    if mode == "rgd":
        return igw_distance_rgd(gi, gj, cfg)[0]
    b = igw_bounds(gi, gj)
    return b.upper if mode == "upper" else b.lower


def pairwise_igw_matrix(
    gaussians: Sequence[Gaussian],
    cfg: Optional[SolverConfig] = None,
    mode: str = "closed",
    threads: Optional[int] = None,
) -> DistanceMatrix:
    """Matrix of IGW distances between all pairs.

    Parameters
    ----------
    gaussians : sequence of Gaussian
        Dimensions may differ; spectra are zero-padded.
    cfg : SolverConfig, optional
        Used by ``mode="rgd"``.
    mode : {"closed", "rgd", "upper", "lower"}
        Closed-form value, gradient-ascent estimate, or an analytic bound.
    threads : int, optional
        Worker threads for the pair loop; ``1`` runs inline. Results do not
        depend on the thread count.

    Raises
    ------
    UnsupportedInputError
        ``mode="closed"`` and some pair has no closed form.
    """
    gs = list(gaussians)
    if not gs:
        raise EmptyInputError("need at least one Gaussian")
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")
    cfg = cfg or SolverConfig()
    n = len(gs)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def work(pair):
        i, j = pair
        return _pair_value(gs[i], gs[j], mode, cfg, pair)

    if threads == 1 or len(pairs) < 2:
        vals = [work(pr) for pr in pairs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(work, pairs))
    out = np.zeros((n, n))
    for (i, j), v in zip(pairs, vals):
        out[i, j] = out[j, i] = v
    return DistanceMatrix(out)


def triangle_violations(dm: DistanceMatrix, slack: float = 1e-8) -> list:
    """Triples ``(i, j, k)`` with ``D[i, k] > D[i, j] + D[j, k] + slack``."""
    e = dm.entries
    bad = e[:, None, :] > e[:, :, None] + e[None, :, :] + slack
    return [tuple(int(x) for x in t) for t in np.argwhere(bad)]


def _padded_spectra(gs: list, dim: int) -> np.ndarray:
    return np.stack([pad_vector(spectral_form(g).lambdas, dim) for g in gs])


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> list:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = kernels.pairwise_sq_dists(x, x[chosen]).min(axis=1)
    while len(chosen) < k:
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # every point coincides with a chosen center; pick an unused index
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        chosen.append(idx)
        d2 = np.minimum(d2, kernels.pairwise_sq_dists(x, x[[idx]])[:, 0])
    return chosen


def _center(members: list, dim: int):
    g = igw_barycenter(WeightedCollection(members), max(m.dim for m in members))
    return g, pad_vector(spectral_form(g).lambdas, dim)


def kmeans_igw(
    gaussians: Sequence[Gaussian],
    k: int,
    seed: int = 0,
    cfg: Optional[SolverConfig] = None,
    max_iters: int = KMEANS_MAX_ITERS,
) -> ClusterResult:
    """k-means++ clustering of centered Gaussians under the IGW distance.

    Assignment uses the centered closed form (distance between zero-padded
    sorted spectra); each center is the uniform IGW barycenter of its
    members at their largest dimension. An empty cluster is re-seeded at the
    point farthest from its current center.

    Parameters
    ----------
    gaussians : sequence of centered Gaussian
    k : int
        Number of clusters, ``1 <= k <= n``.
    seed : int
        Seeds the k-means++ draws; equal seeds give identical results.
    cfg : SolverConfig, optional
        Accepted for interface uniformity; the closed-form assignment needs
        no solver.
    max_iters : int
        Lloyd iteration cap.
    """
    gs = list(gaussians)
    n = len(gs)
    if n == 0:
        raise EmptyInputError("need at least one Gaussian")
    if not 1 <= k <= n:
        raise InvalidInputError(f"k must lie in [1, {n}], got {k}")
    for i, g in enumerate(gs):
        if not g.is_centered(CENTER_ATOL):
            raise UnsupportedInputError(f"k-means expects centered Gaussians (input {i} is not)")
    dim = max(g.dim for g in gs)
    x = _padded_spectra(gs, dim)
    rng = np.random.default_rng(seed)
    seeds = _kmeanspp(x, k, rng)
    centers = [gs[i] for i in seeds]
    cx = x[seeds].copy()
    labels = None
    history = []
    it = 0
    while True:
        d2 = kernels.pairwise_sq_dists(x, cx)
        new = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), new].sum())
        if history and inertia > history[-1] * (1 + 1e-12) + 1e-300:
            raise AssertionError(f"inertia increased from {history[-1]!r} to {inertia!r}")
        history.append(inertia)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        if it >= max_iters:
            break
        it += 1
        for c in range(k):
            idx = np.flatnonzero(labels == c)
            if idx.size == 0:
                own = d2[np.arange(n), labels]
                far = int(np.argmax(own))
                labels[far] = c
                centers[c] = gs[far]
                cx[c] = x[far]
                continue
            centers[c], cx[c] = _center([gs[i] for i in idx], dim)
    return ClusterResult(labels.astype(int), centers, inertia, seed, it, history)


def adjusted_rand_index(a, b) -> float:
    """Adjusted Rand index between two labelings of the same items."""
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    if a.shape != b.shape:
        raise DimensionError("labelings differ in length")
    n = a.shape[0]
    if n == 0:
        raise EmptyInputError("empty labelings")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia, ib), 1.0)

    def comb2(v):
        return float(np.sum(v * (v - 1.0) / 2.0))

    index = comb2(table)
    ra = comb2(table.sum(axis=1))
    rb = comb2(table.sum(axis=0))
    expected = ra * rb / (n * (n - 1) / 2.0) if n > 1 else 0.0
    top = 0.5 * (ra + rb)
    if top == expected:
        return 1.0
    return (index - expected) / (top - expected)


def classical_mds(dm, out_dim: int = 2) -> np.ndarray:
    """Classical (Torgerson) MDS coordinates.

    Double-centers ``-0.5 J D^2 J`` and keeps the top ``out_dim`` eigenpairs,
    with negative eigenvalues clamped to zero. Eigenvector signs follow
    :func:`~gaussalign.spectra.sym_eig`.

    Returns
    -------
    ndarray, shape (n, out_dim)
    """
    e = dm.entries if isinstance(dm, DistanceMatrix) else np.asarray(dm, dtype=float)
    if out_dim < 1:
        raise InvalidInputError("out_dim must be at least 1")
    n = e.shape[0]
    sq = e * e
    j = np.eye(n) - 1.0 / n
    b = symmetrize(-0.5 * j @ sq @ j)
    dec = sym_eig(b)
    m = min(out_dim, n)
    lam = np.clip(dec.eigenvalues[:m], 0.0, None)
    coords = np.zeros((n, out_dim))
    coords[:, :m] = dec.eigenvectors[:, :m] * np.sqrt(lam)
    return coords


def mds_stress(dm, coords: np.ndarray) -> float:
    """Kruskal stress-1 of an embedding against the target distances."""
    e = dm.entries if isinstance(dm, DistanceMatrix) else np.asarray(dm, dtype=float)
    emb = np.sqrt(np.clip(kernels.pairwise_sq_dists(coords, coords), 0.0, None))
    den = float(np.sum(e * e))
    if den == 0.0:
        return 0.0
    return math.sqrt(float(np.sum((e - emb) ** 2)) / den)


def cka(x, y, center: bool = False) -> float:
    """Kernel alignment ``||Y^T X||_F^2 / (||X^T X||_F ||Y^T Y||_F)``.

    The formula is applied to the inputs as given; ``center=True`` subtracts
    column means first.

    Raises
    ------
    DimensionError
        Row counts differ.
    InvalidInputError
        Either Gram matrix is zero, so the ratio is undefined.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"row counts differ: {x.shape[0]} vs {y.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidInputError("inputs contain non-finite values")
    if center:
        x = x - x.mean(axis=0)
        y = y - y.mean(axis=0)
    nx = np.linalg.norm(x.T @ x)
    ny = np.linalg.norm(y.T @ y)
    if nx == 0.0 or ny == 0.0:
        raise InvalidInputError("CKA undefined for a zero Gram matrix")
    val = np.linalg.norm(y.T @ x) ** 2 / (nx * ny)
    return float(min(max(val, 0.0), 1.0))
