"""Gaussian measures: data model, empirical fitting, spectral view, file IO."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, EmptyInputError, InvalidInputError, NotPSDError
from .spectra import CLAMP_RTOL, as_square, is_psd, sym_eig, symmetrize

DEFAULT_RIDGE = 1e-6
PSD_TOL = 1e-8
FILE_SYMMETRY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Gaussian:
    """The measure N(mean, cov) on R^d.

    The covariance is symmetrized on construction and must be PSD up to
    ``is_psd(cov, 1e-8)``.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = as_square(self.cov, "covariance")
        if not np.all(np.isfinite(mean)):
            raise InvalidInputError("mean has non-finite entries")
        if mean.shape[0] != cov.shape[0]:
            raise DimensionError(
                f"mean has length {mean.shape[0]} but covariance is {cov.shape}"
            )
        cov = symmetrize(cov)
        if not is_psd(cov, PSD_TOL):
            raise NotPSDError("covariance is not positive semidefinite")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def centered(cls, cov) -> "Gaussian":
        cov = np.asarray(cov, dtype=float)
        return cls(np.zeros(cov.shape[0]), cov)

    def is_centered(self, atol: float = 1e-12) -> bool:
        return bool(np.linalg.norm(self.mean) <= atol)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}

    def __repr__(self):
        return f"Gaussian(dim={self.dim}, mean={self.mean!r}, cov={self.cov!r})"


@dataclass(frozen=True, eq=False)
class SpectralForm:
    """Eigenbasis view of a Gaussian used by every IGW formula.

    Attributes
    ----------
    lambdas : ndarray
        Covariance eigenvalues, non-increasing, clamped at 0.
    q : ndarray
        Orthogonal eigenvector matrix, ``cov = q diag(lambdas) q^T``.
    m_tilde : ndarray
        Mean in the eigenbasis, ``q^T mean``.
    eta : ndarray
        Moment vector ``sqrt(lambdas) * m_tilde``.
    """

    lambdas: np.ndarray
    q: np.ndarray
    m_tilde: np.ndarray
    eta: np.ndarray

    @property
    def dim(self) -> int:
        return self.lambdas.shape[0]


@dataclass(frozen=True, eq=False)
class WeightedCollection:
    gaussians: tuple
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        gs = tuple(self.gaussians)
        if not gs:
            raise EmptyInputError("collection is empty")
        if self.weights is None:
            w = np.full(len(gs), 1.0 / len(gs))
        else:
            w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != len(gs):
            raise DimensionError(f"{w.shape[0]} weights for {len(gs)} measures")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise InvalidInputError("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "gaussians", gs)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.gaussians)


def fit_gaussian(samples, ridge: float = DEFAULT_RIDGE) -> Gaussian:
    """Moment-matched Gaussian of a point cloud.

    Parameters
    ----------
    samples : array-like, shape (n, d)
    ridge : float
        Added to the covariance diagonal.

    Returns
    -------
    Gaussian
        Sample mean and population covariance (divide by ``n``) plus
        ``ridge * I``.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise EmptyInputError(f"need a non-empty (n, d) sample matrix, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("samples contain non-finite values")
    if ridge < 0:
        raise InvalidInputError("ridge must be non-negative")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / x.shape[0]
    cov[np.diag_indices_from(cov)] += ridge
    return Gaussian(mean, cov)


def spectral_form(g: Gaussian) -> SpectralForm:
    """Eigenbasis view of ``g``.

    Eigenvectors are oriented so that every entry of ``m_tilde`` is
    non-negative (the :func:`~gaussalign.spectra.sym_eig` sign convention
    applies where the mean has no component). This makes ``(lambdas,
    m_tilde)`` invariant under ``(m, S) -> (R m, R S R^T)`` for orthogonal
    ``R`` when the spectrum is simple.
    """
    dec = sym_eig(g.cov)
    lam = dec.eigenvalues
    lam = np.where(lam < 0, 0.0, lam) if lam.size else lam
    q = dec.eigenvectors
    m_tilde = q.T @ g.mean
    flip = np.where(m_tilde < 0, -1.0, 1.0)
    q = q * flip
    m_tilde = np.abs(m_tilde)
    return SpectralForm(lam, q, m_tilde, np.sqrt(lam) * m_tilde)


def pad_to_dim(g: Gaussian, d_target: int) -> Gaussian:
    """Embed ``g`` in R^d_target by appending zero coordinates."""
    d = g.dim
    if d_target < d:
        raise DimensionError(f"cannot pad dimension {d} down to {d_target}")
    if d_target == d:
        return g
    mean = np.zeros(d_target)
    mean[:d] = g.mean
    cov = np.zeros((d_target, d_target))
    cov[:d, :d] = g.cov
    return Gaussian(mean, cov)


def pad_vector(v: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n)
    out[: v.shape[0]] = v
    return out


def is_positive_definite(cov: np.ndarray) -> bool:
    w = np.linalg.eigvalsh(cov)
    return bool(w.size == 0 or (w[-1] > 0 and w[0] > CLAMP_RTOL * w[-1]))


# -- file formats ----------------------------------------------------------


def gaussian_from_dict(obj, source: str = "<dict>") -> Gaussian:
    if not isinstance(obj, dict) or "mean" not in obj or "cov" not in obj:
        raise InvalidInputError(f"{source}: expected an object with 'mean' and 'cov'")
    try:
        mean = np.asarray(obj["mean"], dtype=float)
        cov = np.asarray(obj["cov"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{source}: non-numeric entries ({exc})") from None
    if mean.ndim != 1 or cov.ndim != 2:
        raise InvalidInputError(
            f"{source}: 'mean' must be a flat array and 'cov' an array of rows"
        )
    if cov.shape[0] != cov.shape[1] or cov.shape[0] != mean.shape[0]:
        raise InvalidInputError(
            f"{source}: mean length {mean.shape[0]} vs cov shape {cov.shape}"
        )
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
        raise InvalidInputError(f"{source}: non-finite entries")
    asym = np.max(np.abs(cov - cov.T)) if cov.size else 0.0
    scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
    if asym > FILE_SYMMETRY_TOL * scale:
        raise InvalidInputError(f"{source}: covariance not symmetric (max gap {asym:.3e})")
    try:
        return Gaussian(mean, cov)
    except NotPSDError as exc:
        raise InvalidInputError(f"{source}: {exc}") from None


def load_gaussian(path) -> Gaussian:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidInputError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})"
        ) from None
    return gaussian_from_dict(obj, str(path))


def dump_gaussian(g: Gaussian) -> str:
    # repr-based float formatting round-trips doubles exactly
    return json.dumps(g.to_dict()) + "\n"


def save_gaussian(g: Gaussian, path) -> None:
    Path(path).write_text(dump_gaussian(g), encoding="utf-8")


def read_csv_matrix(path, skip_header: bool = False) -> np.ndarray:
    """Read a headerless, comma-separated numeric matrix.

    Errors name the file and 1-based line of the offending row.
    """
    path = Path(path)
    rows = []
    width = None
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if skip_header and lineno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                vals = [float(cell) for cell in row]
            except ValueError:
                raise InvalidInputError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise InvalidInputError(
                    f"{path}:{lineno}: expected {width} columns, found {len(vals)}"
                )
            if not all(np.isfinite(vals)):
                raise InvalidInputError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def write_csv_matrix(m: np.ndarray, path) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in m:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def load_entity(path, ridge: float = DEFAULT_RIDGE, skip_header: bool = False) -> Gaussian:
    """Gaussian JSON as-is, or a point-cloud CSV fitted with ``fit_gaussian``."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return load_gaussian(path)
    return fit_gaussian(read_csv_matrix(path, skip_header), ridge)


def common_dim(gaussians: Sequence[Gaussian]) -> int:
    return max(g.dim for g in gaussians)
