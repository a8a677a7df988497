"""Time every hot kernel on the numba and the numpy path.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel and problem size with the best-of-``repeat`` wall
time of each backend and the speedup. The first numba call per signature is a
warm-up and excluded.
"""

import argparse
import time

import numpy as np

from mpstomo import _kernels as K


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(rng):
    def cplx(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    for n, first, k in [(12, 4, 2), (16, 6, 3), (20, 8, 3)]:
        psi3 = cplx(2 ** (first - 1), 2**k, 2 ** (n - first - k + 1))
        u, _ = np.linalg.qr(cplx(2**k, 2**k))
        yield "apply_window", f"n={n} k={k}", (K.apply_window_numba, K.apply_window_numpy), (psi3, u)
        yield "window_rdm", f"n={n} k={k}", (K.window_rdm_numba, K.window_rdm_numpy), (psi3,)
    for k in (3, 6, 10):
        counts = rng.integers(0, 1000, 2**k).astype(np.float64)
        yield "walsh_parities", f"k={k}", (K.walsh_parities_numba, K.walsh_parities_numpy), (counts, k)
    for n, dim, m in [(8, 2, 256), (16, 4, 4096), (24, 8, 4096)]:
        mats = cplx(n, 2, dim, dim)
        left, right = cplx(dim), cplx(dim)
        strings = rng.integers(0, 2, (m, n))
        yield (
            "chain_amplitudes",
            f"n={n} D={dim} m={m}",
            (K.chain_amplitudes_numba, K.chain_amplitudes_numpy),
            (left, mats, right, strings),
        )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'size':<22}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, size, (fast, ref), call_args in _cases(rng):
        np.testing.assert_allclose(fast(*call_args), ref(*call_args), rtol=1e-9, atol=1e-9)
        t_fast = _best(lambda: fast(*call_args), args.repeat)
        t_ref = _best(lambda: ref(*call_args), args.repeat)
        print(f"{name:<18}{size:<22}{1e3 * t_fast:>12.3f}{1e3 * t_ref:>12.3f}{t_ref / t_fast:>10.2f}")


if __name__ == "__main__":
    main()
