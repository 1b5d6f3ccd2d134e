"""Compare the numba kernels with their numpy fallbacks.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Times each kernel on representative shapes, then an end-to-end ruin
simulation and a constant estimate with the module-level switch flipped.
The environment flag ``FBMRUIN_DISABLE_NUMBA=1`` selects the same numpy
path at import time.
"""

from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from fbmruin import _kernels
from fbmruin.constants import ConstantConfig, estimate_discrete_pickands
from fbmruin.mc import MCConfig, simulate_one_dim, simulate_two_dim
from fbmruin.model import ModelParams


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(rng):
    for rows, n in ((4096, 64), (1024, 1024), (256, 16384)):
        inc = rng.standard_normal((rows, n))
        shift = np.linspace(0.0, 2.0, n)
        # levels high enough that most rows scan to the end
        levels = 3.0 * np.sqrt(np.arange(1, n + 1)) + 1.0
        yield "crossing_scan", (rows, n), (inc, shift, levels, n // 2)
        zero = np.zeros(n)
        yield "log_ratio", (rows, n), (inc.cumsum(axis=1), zero, -np.abs(np.arange(n) - n / 2) / n)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    results = []

    for name, shape, call_args in kernel_cases(rng):
        fast = getattr(_kernels, f"{name}_numba")
        slow = getattr(_kernels, f"{name}_numpy")
        fast(*call_args)  # compile outside the timing
        a = fast(*call_args)
        b = slow(*call_args)
        pairs = zip(a, b) if isinstance(a, tuple) else [(a, b)]
        same = all(np.allclose(x, y, rtol=1e-12, atol=1e-12) for x, y in pairs)
        t_fast = _best(lambda: fast(*call_args), args.repeat)
        t_slow = _best(lambda: slow(*call_args), args.repeat)
        results.append({"case": f"{name}{shape}", "numba_s": t_fast, "numpy_s": t_slow,
                        "speedup": t_slow / t_fast, "agree": same})

    end_to_end = {
        "simulate_one_dim(H=0.5,u=4,2e5 paths)":
            lambda: simulate_one_dim(1.0, 1.0, 0.5, 1.0, 4.0, MCConfig(n_paths=200_000)),
        "simulate_two_dim((4,1,1,4),H=0.75,u=5,5e4 paths)":
            lambda: simulate_two_dim(ModelParams(4, 1, 1, 4, 0.75, 1.0), 5.0, MCConfig(n_paths=50_000)),
        "discrete_pickands(alpha=0.1,2e4 paths)":
            lambda: estimate_discrete_pickands(0.1, ConstantConfig(n_paths=20_000)),
    }
    saved = _kernels.USE_NUMBA
    try:
        for label, fn in end_to_end.items():
            times = {}
            for flag in (True, False):
                _kernels.USE_NUMBA = flag
                fn()
                times[flag] = _best(fn, max(1, args.repeat // 2))
            results.append({"case": label, "numba_s": times[True], "numpy_s": times[False],
                            "speedup": times[False] / times[True], "agree": None})
    finally:
        _kernels.USE_NUMBA = saved

    width = max(len(r["case"]) for r in results)
    print(f"{'case':<{width}}  {'numba [s]':>10}  {'numpy [s]':>10}  {'speedup':>7}  agree")
    for r in results:
        agree = "" if r["agree"] is None else str(r["agree"])
        print(f"{r['case']:<{width}}  {r['numba_s']:>10.4f}  {r['numpy_s']:>10.4f}  {r['speedup']:>7.2f}  {agree}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
