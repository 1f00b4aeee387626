"""Time one kinetic step with the compiled and numpy backends.

    python3 benchmarks/bench_step.py [--nx 2000 8000] [--nv 64] [--repeat 20]
"""

import argparse
import time

import numpy as np

from kinwave import kernels as kn
from kinwave import simulator as sm
from kinwave.core import _step_py

try:
    from kinwave.core import _step
except ImportError:
    _step = None


def setup(nx, nv):
    state = sm.init_state(kn.uniform(1.0), 0.5, sm.Grid(-20.0, 80.0, nx, nv), "step")
    return state, state.max_dt()


def time_backend(fn, nx, nv, repeat):
    state, dt = setup(nx, nv)
    rho = np.empty(nx)
    a = np.ascontiguousarray(state.a)
    args = (a, state.M, state.q, state.r, dt, state.dx, state.left_in, state.right_in, rho, False)
    fn(state.g, *args)  # warm up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(state.g, *args)
        best = min(best, time.perf_counter() - t0)
    return best, state.g


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, nargs="+", default=[1000, 4000, 8000])
    ap.add_argument("--nv", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if _step is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'nx':>6} {'nv':>4} {'numpy ms':>10} {'compiled ms':>12} {'speedup':>8} {'max diff':>10}")
    for nx in args.nx:
        t_py, g_py = time_backend(_step_py.kinetic_step, nx, args.nv, args.repeat)
        if _step is None:
            print(f"{nx:>6} {args.nv:>4} {1e3 * t_py:>10.3f} {'-':>12} {'-':>8} {'-':>10}")
            continue
        t_c, g_c = time_backend(_step.kinetic_step, nx, args.nv, args.repeat)
        diff = float(np.max(np.abs(g_py - g_c)))
        print(f"{nx:>6} {args.nv:>4} {1e3 * t_py:>10.3f} {1e3 * t_c:>12.3f} {t_py / t_c:>8.1f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
