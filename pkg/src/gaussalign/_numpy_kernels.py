"""Pure-numpy reference implementations of the hot kernels."""

import numpy as np


def pairwise_sq_dists(a, b):
    """``out[i, j] = sum_k (a[i, k] - b[j, k])**2``, exact differences."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    out = np.empty((a.shape[0], b.shape[0]))
    # row chunks keep the (chunk, m, D) temporary bounded
    chunk = max(1, 2_000_000 // max(1, b.shape[0] * a.shape[1]))
    for s in range(0, a.shape[0], chunk):
        diff = a[s : s + chunk, None, :] - b[None, :, :]
        out[s : s + chunk] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def project_blocks(q, lam, u, z):
    """Tangent projection onto ``{V : V_i U_i^T + U_i V_i^T = 0}``, per block.

    Solves ``S_i Sigma_i + Sigma_i S_i = Z_i U_i^T + U_i Z_i^T`` in the
    eigenbasis ``Sigma_i = q_i diag(lam_i) q_i^T`` and returns
    ``(Z - S U, S)``.
    """
    zu = z @ np.swapaxes(u, 1, 2)
    sym = zu + np.swapaxes(zu, 1, 2)
    qt = np.swapaxes(q, 1, 2)
    st = (qt @ sym @ q) / (lam[:, :, None] + lam[:, None, :])
    s = q @ st @ qt
    return z - s @ u, s
