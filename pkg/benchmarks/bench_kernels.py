"""Time the compiled sampling core against the NumPy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--replicas 512] [--steps 20000]

Both backends receive identical tables; per-replica streams make the
compiled results reproducible, the fallback draws in lockstep ensembles, so
throughput (not bit identity) is what is compared here.
"""

import argparse
import time

import numpy as np

from phi4well import _core_py
from phi4well.potential import quartic_potential
from phi4well.sampler import _drift_data, build_step_kernel
from phi4well.spectral import default_grid, solve_parity_reduced

try:
    from phi4well import _core
except ImportError:
    _core = None

SEED = 20260814


def best_of(fn, args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--replicas", type=int, default=512)
    parser.add_argument("--steps", type=int, default=20000)
    parser.add_argument("--beta", type=float, default=5.0)
    args = parser.parse_args()

    m = solve_parity_reduced(quartic_potential(), args.beta, default_grid(args.beta), k=8)
    kernel = build_step_kernel(m, 0.005)
    ip, ia = kernel.init_tables("pi")
    sp, sa = kernel.step_tables()
    signs = kernel.node_signs()
    drift, x_lo, h = _drift_data(m)
    x0 = np.full(args.replicas, 1.0)

    cases = [
        ("chain_paths", "chain_paths",
         (ip, ia, sp, sa, args.steps, SEED, 0, args.replicas)),
        ("chain_hit_zero", "chain_hit_zero",
         (ip, ia, sp, sa, signs, args.steps, SEED, 0, args.replicas)),
        ("em_paths", "em_paths",
         (x0, drift, x_lo, h, args.steps, 1e-3, args.beta, SEED, 0)),
        ("em_hit_zero", "em_hit_zero",
         (x0, drift, x_lo, h, args.steps, 1e-3, args.beta, SEED, 0)),
    ]

    total = args.replicas * args.steps
    print(f"beta={args.beta:g} replicas={args.replicas} steps={args.steps} "
          f"({total:.2e} replica-steps ceiling per call)")
    print(f"{'kernel':<16} {'numpy':>10} {'cython':>10} {'speedup':>8}")
    for label, name, call_args in cases:
        t_py = best_of(getattr(_core_py, name), call_args)
        if _core is None:
            print(f"{label:<16} {t_py:>9.3f}s {'absent':>10} {'-':>8}")
            continue
        t_cy = best_of(getattr(_core, name), call_args)
        print(f"{label:<16} {t_py:>9.3f}s {t_cy:>9.3f}s {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
