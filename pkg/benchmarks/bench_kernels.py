"""Compare the compiled and pure-Python region-quadrature kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times ``region_integrals`` on a fixed set of regions (one-sided, banded,
strongly correlated) and one full ``keyrate`` call per backend, and checks
that both backends agree.
"""

import argparse
import math
import time

import numpy as np

from pscvqkd import _kernels_py, postselection
from pscvqkd.channel import ChannelParams, ProtocolParams
from pscvqkd.keyrate import keyrate
from pscvqkd.postselection import PostSelectionRegion

INF = math.inf

CASES = {
    "one-sided": (4.0, 2.0, 2.005, 1.0, INF, 0.8, INF),
    "banded": (4.0, 2.0, 2.005, 1.0, 3.0, 0.8, 2.5),
    "rho=0.999": (3.0, 0.999 * math.sqrt(6.0), 2.0, 0.5, INF, 0.2, INF),
    "wide modulation": (40.0, 12.0, 9.0, 2.0, 14.0, 1.0, INF),
}


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()

    compiled = postselection._compiled
    if compiled is None:
        print("compiled kernel not built; run `python3 setup.py build_ext --inplace`")
        return
    print(f"{'case':18s} {'python us':>10s} {'cython us':>10s} {'speedup':>8s} "
          f"{'intervals':>9s} {'max rel diff':>12s}")
    for name, args_ in CASES.items():
        py, n_py = _kernels_py.region_integrals(*args_)
        cy, n_cy = compiled.region_integrals(*args_)
        diff = float(np.max(np.abs(py - cy) / np.maximum(np.abs(py), 1e-300)))
        t_py = best_time(lambda: _kernels_py.region_integrals(*args_), args.repeat)
        t_cy = best_time(lambda: compiled.region_integrals(*args_), args.repeat)
        print(f"{name:18s} {t_py * 1e6:10.1f} {t_cy * 1e6:10.1f} {t_py / t_cy:8.1f} "
              f"{n_py:>4d}/{n_cy:<4d} {diff:12.2e}")

    p, ch = ProtocolParams(4.0), ChannelParams(0.5, 0.05)
    region = PostSelectionRegion(1.0, INF, 0.8, INF)
    for backend in ("python", "cython"):
        t = best_time(lambda: keyrate(p, ch, region, backend), args.repeat)
        print(f"keyrate ({backend}): {t * 1e6:.1f} us")


if __name__ == "__main__":
    main()
