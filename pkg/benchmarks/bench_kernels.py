"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 5] [--paths 20000] [--steps 64]
"""
import argparse
import math
import timeit

import numpy as np

from timing_hedge import _kernels_py, kernels
from timing_hedge.quadrature import gauss_legendre

try:
    from timing_hedge import _kernels as compiled
except ImportError:
    compiled = None


def walk_case(paths, steps, rng):
    dt = np.full(steps, 1.0 / steps)
    z = rng.standard_normal((paths, steps))
    u = rng.random((paths, steps))
    return lambda impl: kernels.bridge_walk(4.6, 0.01 * dt, 0.2 * np.sqrt(dt), math.log(80.0), z, u, True, impl=impl)


def convolve_case(nodes):
    xs = np.linspace(10.0, 35.0, nodes)
    fs = np.maximum(np.exp(0.2 * xs) - 90.0, 0.0)
    barrier = math.log(80.0) / 0.2
    gx, gw = gauss_legendre(-1.0, 1.0, 48)
    breaks = [math.log(90.0) / 0.2, 2 * barrier - math.log(90.0) / 0.2]
    return lambda impl: kernels.gauss_convolve(xs, fs, barrier, xs, 0.05, 0.4, gx, gw, 10.0, breaks, impl=impl)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--paths", type=int, default=20000)
    ap.add_argument("--steps", type=int, default=64)
    ap.add_argument("--nodes", type=int, default=513)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; nothing to compare")
        return 1
    rng = np.random.default_rng(0)
    cases = {
        f"bridge_walk {args.paths}x{args.steps}": walk_case(args.paths, args.steps, rng),
        f"gauss_convolve {args.nodes} nodes": convolve_case(args.nodes),
    }
    print(f"{'kernel':<30s} {'python [s]':>12s} {'compiled [s]':>13s} {'speedup':>8s}")
    for name, fn in cases.items():
        slow = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        fast = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat))
        print(f"{name:<30s} {slow:12.4f} {fast:13.4f} {slow / fast:8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
