"""Compare the JIT and pure-numpy kernel-evaluation paths.

Usage: python benchmarks/bench_assembly.py [max_depth]

Assembly evaluates M kernel components on all N^2 grid pairs; this times
that hot loop on both backends at a range of grid depths and reports the
speedup plus the max absolute discrepancy between the two paths.
"""
import sys
import time

import numpy as np

from nclp import _accel


def _time(fn, *args, repeats=3):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    max_depth = int(sys.argv[1]) if len(sys.argv) > 1 else 11
    if _accel.backend_name() != "numba":
        print("numba backend unavailable (NCLP_NUMBA=0 or not installed); "
              "nothing to compare")
        return 1
    print(f"{'K':>3} {'N':>6} {'M':>3} {'numba (s)':>10} {'numpy (s)':>10} "
          f"{'speedup':>8} {'max |diff|':>11}")
    for K in range(7, max_depth + 1):
        N = 2 ** K
        M = K
        diff = _accel.torus_diff_1d(N)
        cdiff = np.ascontiguousarray(diff)
        _accel._lp_bumps_numba(cdiff, M)          # compile outside the timer
        t_nb, a = _time(_accel._lp_bumps_numba, cdiff, M)
        t_np, b = _time(_accel._lp_bumps_numpy, diff, M)
        err = float(np.abs(a - b).max())
        print(f"{K:>3} {N:>6} {M:>3} {t_nb:>10.4f} {t_np:>10.4f} "
              f"{t_np / t_nb:>8.2f} {err:>11.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
