"""Compare the numpy and numba backends of the hot kernels.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Both backends are imported directly, so the GAUSSALIGN_NUMBA flag is not
needed here. Outputs are checked for agreement before timing.
"""

import argparse
import timeit

import numpy as np

from gaussalign import _numpy_kernels

try:
    from gaussalign import _numba_kernels
except ImportError:
    _numba_kernels = None


def _cases(rng):
    x = rng.random((2000, 16))
    y = rng.random((64, 16))
    yield "pairwise_sq_dists 2000x64 (D=16)", "pairwise_sq_dists", (x, y)

    for p in (10, 100):
        d, k = 3, 4
        a = rng.standard_normal((p, d, d))
        covs = a @ np.swapaxes(a, 1, 2) + 0.1 * np.eye(d)
        lam, q = np.linalg.eigh(covs)
        u = rng.standard_normal((p, d, k))
        z = rng.standard_normal((p, d, k))
        yield f"project_blocks p={p} d={d} k={k}", "project_blocks", (q, lam, u, z)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    if _numba_kernels is None:
        print("numba not installed; timing the numpy backend only")
    print(f"{'kernel':40s} {'numpy (us)':>12s} {'numba (us)':>12s} {'speedup':>8s}")
    for label, name, inputs in _cases(rng):
        f_np = getattr(_numpy_kernels, name)
        t_np = min(timeit.repeat(lambda: f_np(*inputs), number=1, repeat=args.repeat)) * 1e6
        if _numba_kernels is None:
            print(f"{label:40s} {t_np:12.1f} {'-':>12s} {'-':>8s}")
            continue
        f_nb = getattr(_numba_kernels, name)
        ref, out = f_np(*inputs), f_nb(*inputs)  # also triggers compilation
        ref = ref if isinstance(ref, tuple) else (ref,)
        out = out if isinstance(out, tuple) else (out,)
        for r, o in zip(ref, out):
            np.testing.assert_allclose(o, r, rtol=1e-10, atol=1e-12)
        t_nb = min(timeit.repeat(lambda: f_nb(*inputs), number=1, repeat=args.repeat)) * 1e6
        print(f"{label:40s} {t_np:12.1f} {t_nb:12.1f} {t_np / t_nb:8.2f}")


if __name__ == "__main__":
    main()
