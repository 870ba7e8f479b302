"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 20000] [--repeat 5]

Each kernel runs once untimed (numba compiles on first call), then the best
of ``--repeat`` runs is reported for each backend along with the speedup and
the largest absolute difference between the two outputs.
"""

import argparse
import time

import numpy as np

from bma_identify import ex4_exposure, kernels
from bma_identify.core import McConfig
from bma_identify.mc_stat import gauss_legendre


def cases(n, seed):
    rng = np.random.default_rng(seed)
    cfg = McConfig()
    x, w = gauss_legendre(cfg.quad_nodes)
    b = rng.uniform(0.51, 0.99, (2, n))
    phi = rng.dirichlet(np.ones(8), n)
    lo = np.maximum(0.5, ex4_exposure.sensitivity_threshold_batch(phi))
    lam = lo + (1 - lo) * rng.uniform(size=n)
    return {
        "ex3_inv_cube": (b[0], b[1], x, w),
        "ex4_rd_strata": (phi, lam),
        "ex4_psi0": (phi, lo, x, w),
        "ex4_scan": (phi, lo, cfg.root_scan_points, cfg.root_tol, kernels.ZERO_TOL),
    }


def best_of(fn, args, repeat):
    out = fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def max_diff(a, b):
    if isinstance(a, tuple):
        return max(max_diff(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a, float), np.asarray(b, float)
    ok = np.isfinite(a) & np.isfinite(b)
    return float(np.abs(a[ok] - b[ok]).max()) if ok.any() else 0.0


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=20_000, help="rows per kernel call")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    impls = {"numpy": kernels.implementation("numpy")}
    try:
        impls["numba"] = kernels.implementation("numba")
    except RuntimeError:
        print("numba is not installed; timing numpy only")

    print(f"{'kernel':<15}{'numpy s':>12}{'numba s':>12}{'speedup':>10}{'max |diff|':>13}")
    for name, a in cases(args.n, args.seed).items():
        t_np, out_np = best_of(getattr(impls["numpy"], name), a, args.repeat)
        if "numba" in impls:
            t_nb, out_nb = best_of(getattr(impls["numba"], name), a, args.repeat)
            print(f"{name:<15}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}x{max_diff(out_np, out_nb):>13.1e}")
        else:
            print(f"{name:<15}{t_np:>12.4f}")


if __name__ == "__main__":
    main()
