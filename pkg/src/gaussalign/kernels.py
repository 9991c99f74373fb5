"""Hot-loop kernels with an optional numba backend.

Set ``GAUSSALIGN_NUMBA=1`` before import to use the compiled kernels; the
pure-numpy versions are used otherwise or when numba is unavailable.
"""

import os
import warnings

import numpy as np

from . import _numpy_kernels

_FLAG = os.environ.get("GAUSSALIGN_NUMBA", "0").strip().lower()
USE_NUMBA = _FLAG in ("1", "true", "yes", "on")

if USE_NUMBA:
    try:
        from . import _numba_kernels as _backend
    except ImportError:  # pragma: no cover - depends on environment
        warnings.warn("GAUSSALIGN_NUMBA is set but numba is not importable; using numpy")
        USE_NUMBA = False
        _backend = _numpy_kernels
else:
    _backend = _numpy_kernels

BACKEND = "numba" if USE_NUMBA else "numpy"


def pairwise_sq_dists(a, b):
    """Squared Euclidean distances between rows of ``a`` and rows of ``b``."""
    return _backend.pairwise_sq_dists(
        np.ascontiguousarray(a, dtype=np.float64), np.ascontiguousarray(b, dtype=np.float64)
    )


def project_blocks(q, lam, u, z):
    """Block-Gram tangent projection; see ``_numpy_kernels.project_blocks``."""
    return _backend.project_blocks(
        np.ascontiguousarray(q, dtype=np.float64),
        np.ascontiguousarray(lam, dtype=np.float64),
        np.ascontiguousarray(u, dtype=np.float64),
        np.ascontiguousarray(z, dtype=np.float64),
    )
