"""Timing of the sample-matrix assembly kernels and of the two data-driven
reductions.

Usage::

    python3 benchmarks/bench_kernels.py [--nu 1000] [--repeat 5]
    SODBT_DISABLE_NUMBA=1 python3 benchmarks/bench_kernels.py   # numpy only

The kernel table compares the numba and numpy paths on identical inputs;
the reduction table compares dense Data-BT with KryData-BT at ``m = 30``.
"""

import argparse
import time

import numpy as np

from sodbt import _kernels
from sodbt.databt import databt_reduce
from sodbt.evaluation import hinf_error_grid
from sodbt.model import benchmark_chain
from sodbt.quadrature import offset_rule_pair
from sodbt.sampling import sample_model
from sodbt.sylvester import krydatabt_reduce


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_args(samples):
    q, p = samples.q_rule, samples.p_rule
    return (q.positive_nodes, q.weights, samples.q_values, p.positive_nodes, p.weights, samples.p_values,
            samples.alpha, samples.beta)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nu", type=int, nargs="+", default=[250, 500, 1000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--m", type=int, default=30)
    ap.add_argument("--r", type=int, default=10)
    args = ap.parse_args()

    sys_ = benchmark_chain()
    backends = ["numba", "numpy"] if _kernels.HAVE_NUMBA else ["numpy"]
    print(f"active backend: {_kernels.active_backend()}")
    print(f"{'nu':>6} " + " ".join(f"{b + ' [s]':>12}" for b in backends) + f" {'speedup':>8}")
    for nu in args.nu:
        p, q = offset_rule_pair(1e-2, 1e4, nu)
        kargs = kernel_args(sample_model(sys_, p, q))
        for b in backends:
            _kernels.mdk_real(*kargs, backend=b)  # warm-up and jit
        t = [best_of(lambda b=b: _kernels.mdk_real(*kargs, backend=b), args.repeat) for b in backends]
        speed = f"{t[1] / t[0]:8.1f}" if len(t) == 2 else f"{'-':>8}"
        print(f"{nu:>6} " + " ".join(f"{x:12.4e}" for x in t) + f" {speed}")

    print()
    print(f"{'nu':>6} {'data-bt [s]':>12} {'krydata [s]':>12} {'hinf data':>10} {'hinf kry':>10}")
    for nu in args.nu:
        p, q = offset_rule_pair(1e-2, 1e4, nu)
        samples = sample_model(sys_, p, q)
        t0 = time.perf_counter()
        red_d = databt_reduce(samples, args.r)
        t1 = time.perf_counter()
        red_k = krydatabt_reduce(samples, args.r, m=args.m)
        t2 = time.perf_counter()
        ed = hinf_error_grid(sys_, red_d, count=500).hinf_rel
        ek = hinf_error_grid(sys_, red_k, count=500).hinf_rel
        print(f"{nu:>6} {t1 - t0:12.4e} {t2 - t1:12.4e} {ed:10.3e} {ek:10.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
