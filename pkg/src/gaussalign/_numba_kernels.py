"""numba-compiled versions of the kernels in ``_numpy_kernels``."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def pairwise_sq_dists(a, b):
    n, dim = a.shape
    m = b.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(dim):
                t = a[i, k] - b[j, k]
                acc += t * t
            out[i, j] = acc
    return out


@njit(cache=True, nogil=True)
def project_blocks(q, lam, u, z):
    p, d, k = u.shape
    out = np.empty_like(z)
    s_all = np.empty((p, d, d))
    sym = np.empty((d, d))
    st = np.empty((d, d))
    tmp = np.empty((d, d))
    for i in range(p):
        for a in range(d):
            for b in range(a, d):
                acc = 0.0
                for c in range(k):
                    acc += z[i, a, c] * u[i, b, c] + u[i, a, c] * z[i, b, c]
                sym[a, b] = acc
                sym[b, a] = acc
        # st = q^T sym q / (lam_a + lam_b)
        for a in range(d):
            for b in range(d):
                acc = 0.0
                for c in range(d):
                    acc += sym[a, c] * q[i, c, b]
                tmp[a, b] = acc
        for a in range(d):
            for b in range(d):
                acc = 0.0
                for c in range(d):
                    acc += q[i, c, a] * tmp[c, b]
                st[a, b] = acc / (lam[i, a] + lam[i, b])
        # s = q st q^T
        for a in range(d):
            for b in range(d):
                acc = 0.0
                for c in range(d):
                    acc += q[i, a, c] * st[c, b]
                tmp[a, b] = acc
        for a in range(d):
            for b in range(d):
                acc = 0.0
                for c in range(d):
                    acc += tmp[a, c] * q[i, b, c]
                s_all[i, a, b] = acc
        for a in range(d):
            for c in range(k):
                acc = 0.0
                for b in range(d):
                    acc += s_all[i, a, b] * u[i, b, c]
                out[i, a, c] = z[i, a, c] - acc
    return out, s_all
