"""Time each pointwise kernel under the numba and numpy backends.

    python3 benchmarks/bench_kernels.py --size 262144 --repeat 50

The numba column excludes compilation (one warm-up call per kernel). Both
backends are loaded in the same process through ``get_kernels`` so the
``CHTX_DISABLE_NUMBA`` flag does not need to be toggled.
"""

import argparse
import time

import numpy as np

from chtx.kernels import get_kernels


def _cases(n, rng):
    u = rng.uniform(0.0, 2.0, n)
    v = rng.uniform(0.0, 1.0, n)
    w = rng.uniform(0.0, 1.0, n)
    g = rng.standard_normal(n)
    return {
        "logistic_update": (u, 1.0, 1.0, 1e-3),
        "consumption_update": (v, u, 1.0, 1e-3),
        "weighted_power_sum": (u, w, 2.5),
        "lyapunov_sum": (u, v, w, 2.5, 0.4),
        "min_max": (u,),
        "flux": (u, g),
    }


def _best(fn, args, repeat):
    fn(*args)  # warm-up / JIT
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256 * 256)
    ap.add_argument("--repeat", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    cases = _cases(args.size, np.random.default_rng(args.seed))
    nb, npk = get_kernels("numba"), get_kernels("numpy")
    print(f"{'kernel':<20} {'numpy [us]':>12} {'numba [us]':>12} {'speedup':>8}")
    for name, fargs in cases.items():
        t_np = _best(npk[name], fargs, args.repeat)
        t_nb = _best(nb[name], fargs, args.repeat)
        print(f"{name:<20} {t_np * 1e6:12.1f} {t_nb * 1e6:12.1f} {t_np / t_nb:8.2f}")


if __name__ == "__main__":
    main()
