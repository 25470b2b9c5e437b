"""Compiled vs pure-Python search kernels.

Runs each kernel on the same seeded inputs with both backends, checks the
answers agree and prints median wall times.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from postedprice import _fallback, kernels
from postedprice.oracle import _density_order
from postedprice.workload import SmallRandomConfig, gen_small_random


def _knapsack_case(seed):
    rng = np.random.default_rng(seed)
    n = 200
    w = rng.integers(1, 200, size=n)
    v = rng.integers(1, 4096, size=n) / 1024.0
    return (w, v, 10_000)


def _ordered(reqs):
    order = _density_order(reqs, range(len(reqs)))
    d = np.array([reqs[i].demands for i in order], dtype=float)
    v = np.array([reqs[i].valuation for i in order])
    return [reqs[i] for i in order], d, v


def _multi_resource_case(seed):
    reqs = gen_small_random(SmallRandomConfig(num_users=22, num_resources=3, demand_low=0.05,
                                              demand_high=0.3, seed=seed))
    _, d, v = _ordered(reqs)
    return (d, v, 1e-9)


def _multi_slot_case(seed):
    cfg = SmallRandomConfig(num_users=14, num_resources=2, horizon=8, max_slots=3, lam=1.4,
                            demand_low=0.1, seed=seed)
    reqs, d, v = _ordered(gen_small_random(cfg))
    cnt = np.array([r.slot_count for r in reqs])
    lo = np.array([r.start_slot for r in reqs])
    hi = np.array([min(r.start_slot + int(np.ceil(r.slot_count * cfg.lam - 1e-9)) - 1, cfg.horizon - 1)
                   for r in reqs])
    return (d, v, cnt, lo, hi, cfg.horizon, 1e-9)


CASES = {
    "knapsack_dp": _knapsack_case,
    "bnb_multi_resource": _multi_resource_case,
    "bnb_multi_slot": _multi_slot_case,
}


def _time(fn, args, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args(argv)
    if not kernels.compiled_available():
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    from postedprice import _kernels

    print(f"{'kernel':<20} {'seed':>4} {'python_s':>10} {'cython_s':>10} {'speedup':>8}")
    for name, make in CASES.items():
        for seed in range(args.seeds):
            case = make(seed)
            tp, a = _time(getattr(_fallback, name), case, args.repeat)
            tc, b = _time(getattr(_kernels, name), case, args.repeat)
            if a[0] != b[0]:
                raise SystemExit(f"{name} seed {seed}: backends disagree ({a[0]} vs {b[0]})")
            print(f"{name:<20} {seed:>4} {tp:>10.4f} {tc:>10.4f} {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
