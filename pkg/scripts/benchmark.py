"""Compare the compiled kernels with the numpy fallback.

Usage: python scripts/benchmark.py [--repeat N]
"""
import argparse
import time

import numpy as np

from kpmass import _fallback
from kpmass.evolve import mass_line

try:
    from kpmass import _ckernels
except ImportError:
    _ckernels = None


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_fourier_sum(mod, repeat):
    rng = np.random.default_rng(0)
    xi = np.sort(rng.uniform(-9.0, 9.0, 4000))
    coeff = (rng.standard_normal((1, xi.size)) + 1j * rng.standard_normal((1, xi.size)))
    coeff_a = coeff / (1j * xi)
    xs = mass_line(512.0)
    out = {}

    def run():
        u = np.zeros((1, xs.size))
        a = np.zeros_like(u)
        mod.fourier_sum(coeff, coeff_a, xi, xs, u, a)
        out["u"] = u

    return _best(run, repeat), out["u"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; nothing to compare")
        return
    print(f"{'kernel':<18}{'numpy [s]':>12}{'compiled [s]':>14}{'speedup':>10}{'max diff':>12}")
    for name, bench in (("fourier_sum", bench_fourier_sum),):
        tp, vp = bench(_fallback, args.repeat)
        tc, vc = bench(_ckernels, args.repeat)
        diff = float(np.max(np.abs(vp - vc)))
        print(f"{name:<18}{tp:>12.3f}{tc:>14.3f}{tp / tc:>10.2f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
