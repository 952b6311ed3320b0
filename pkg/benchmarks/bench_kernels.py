"""Benchmark the jitted hot kernels against their pure-numpy twins.

Run after installing the package:

    python benchmarks/bench_kernels.py --sizes 1000,10000,100000 --repeats 50

The numpy column is the fallback path selected by LMMPF_NUMBA=0; the numba
column is the default path. An end-to-end filter timing at the current
kernel selection is printed at the bottom.
"""

import argparse
import time

import numpy as np

from lmmpf import _kernels as K
from lmmpf._accel import NUMBA_ACTIVE, accel_mode
from lmmpf.experiment import ExperimentConfig, run_replicate


def time_call(fn, *args, repeats=50):
    fn(*args)  # warmup / JIT
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(n, rng):
    d = 3
    y = rng.normal(size=d)
    means = rng.normal(size=(n, d))
    var = rng.uniform(0.5, 1.5, size=d)
    logw = rng.normal(size=n)
    w = np.abs(logw) + 1e-3
    cum = np.cumsum(w / w.sum())
    us = rng.random(n)
    values = rng.normal(size=(n, d))
    weights = np.full(n, 1.0 / n)
    states = rng.normal(size=(n, 4, d))
    derivs = rng.normal(size=(n, 4, d))
    alpha = np.array([1.0, 0.0, 0.0, 0.0])
    beta = rng.normal(size=4)
    return {
        "gaussian_logpdf_diag": (
            K.gaussian_logpdf_diag_numpy,
            K.gaussian_logpdf_diag_jit,
            (y, means, var),
        ),
        "normalize_log_weights": (
            K.normalize_log_weights_numpy,
            K.normalize_log_weights_jit,
            (logw,),
        ),
        "inverse_cdf_indices": (
            K.inverse_cdf_indices_numpy,
            K.inverse_cdf_indices_jit,
            (cum, us),
        ),
        "weighted_mean_var": (
            K.weighted_mean_var_numpy,
            K.weighted_mean_var_jit,
            (values, weights),
        ),
        "multistep_combine": (
            K.multistep_combine_numpy,
            K.multistep_combine_jit,
            (states, derivs, alpha, beta, 0.1),
        ),
    }


def main() -> int:
    parser = argparse.ArgumentParser(description="Compare numba and numpy kernel paths")
    parser.add_argument("--sizes", default="1000,10000,100000")
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    rng = np.random.default_rng(0)

    if not NUMBA_ACTIVE:
        print("numba path inactive (LMMPF_NUMBA=0 or numba missing); timing numpy only")

    header = f"{'kernel':<24}{'N':>9}{'numpy (us)':>14}"
    if NUMBA_ACTIVE:
        header += f"{'numba (us)':>14}{'speedup':>9}"
    print(header)
    for n in sizes:
        cases = kernel_cases(n, rng)
        for name, (fn_np, fn_jit, call_args) in cases.items():
            t_np = time_call(fn_np, *call_args, repeats=args.repeats)
            line = f"{name:<24}{n:>9}{t_np * 1e6:>14.1f}"
            if NUMBA_ACTIVE:
                t_jit = time_call(fn_jit, *call_args, repeats=args.repeats)
                line += f"{t_jit * 1e6:>14.1f}{t_np / t_jit:>9.2f}"
            print(line)

    cfg = ExperimentConfig(
        problem="gaussian_decay", pair="AB1-AB2", replicates=1, seed=0
    )
    t0 = time.perf_counter()
    run_replicate(cfg, 0)
    run_time = time.perf_counter() - t0
    print(f"\nfull filter run (N=150, 50 steps) on the {accel_mode()} path: {run_time * 1e3:.1f} ms")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
