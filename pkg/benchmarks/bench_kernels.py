"""Benchmark the compiled loss kernel against the pure-numpy fallback.

Both backends share one contract: rank_loss_and_grad(sims, labels,
variant_code, tau, b, alpha). Run with:

    python3 benchmarks/bench_kernels.py [--sizes 32,64,128] [--repeats 20]
"""

import argparse
import time

import numpy as np

from rankloss.kernels import _ref
from rankloss.losses import LossSpec

try:
    from rankloss.kernels import _core
except ImportError:
    _core = None

VARIANTS = [
    LossSpec("O"),
    LossSpec("I_b"),
    LossSpec("D_q", alpha=2.0),
    LossSpec("smooth_ap"),
]


def make_batch(rng, n, d, n_classes):
    x = rng.standard_normal((n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    labels = np.repeat(np.arange(n_classes), -(-n // n_classes))[:n]
    rng.shuffle(labels)
    return x @ x.T, labels


def time_backend(backend, sims, labels, spec, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        backend.rank_loss_and_grad(sims, labels, spec.code, spec.tau, spec.b, spec.alpha)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="32,64,128,256")
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--classes", type=int, default=8)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if _core is None:
        print("compiled backend unavailable; timing the python fallback only")
    rng = np.random.default_rng(0)
    header = f"{'n':>5s} {'variant':>14s} {'python':>10s} {'cython':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for n in (int(v) for v in args.sizes.split(",")):
        sims, labels = make_batch(rng, n, args.dim, args.classes)
        for spec in VARIANTS:
            t_py = time_backend(_ref, sims, labels, spec, args.repeats)
            if _core is None:
                print(f"{n:5d} {spec.label():>14s} {t_py * 1e3:9.3f}ms {'-':>10s} {'-':>8s}")
                continue
            t_cy = time_backend(_core, sims, labels, spec, args.repeats)
            print(
                f"{n:5d} {spec.label():>14s} {t_py * 1e3:9.3f}ms "
                f"{t_cy * 1e3:9.3f}ms {t_py / t_cy:7.1f}x"
            )


if __name__ == "__main__":
    main()
