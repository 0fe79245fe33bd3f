"""Compare the compiled kernel extension against the NumPy fallback.

Run as:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from fplap import _kernels_py
from fplap.mesh import ProblemParams, build_mesh

try:
    from fplap import _kernels as _ext
except ImportError:
    _ext = None

SIZES = (16, 32, 64, 128, 256)
PVALUES = (2.0, 2.5)  # pow-free fast path vs fractional-exponent loops
S = 0.3
REPS = 50


def _time(fn, *args):
    best = float("inf")
    for _ in range(REPS):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(7)
    for pval in PVALUES:
        print(f"\np = {pval}, s = {S}, best of {REPS} runs, times in microseconds")
        header = f"{'n':>6} {'op':>12} {'numpy':>10} {'cython':>10} {'speedup':>8}"
        print(header)
        print("-" * len(header))
        for n in SIZES:
            mesh = build_mesh(
                ProblemParams(p=pval, s=S, a=-1.0, b=1.0, n=n, c0=2.0, q=4.0))
            u = np.ascontiguousarray(rng.standard_normal(n))
            v = np.ascontiguousarray(rng.standard_normal(n))
            w = np.ascontiguousarray(mesh.kernel)
            tails = np.ascontiguousarray(mesh.tails)
            cases = (
                ("energy", (u, w, tails, mesh.h, pval)),
                ("apply", (u, w, tails, mesh.h, pval)),
                ("hess_action", (u, v, w, tails, mesh.h, pval, 1e-10)),
            )
            for op, args in cases:
                fn_py = getattr(_kernels_py, {"apply": "apply_op"}.get(op, op))
                t_py = _time(fn_py, *args)
                if _ext is None:
                    print(f"{n:>6} {op:>12} {t_py * 1e6:>10.1f} {'absent':>10} {'':>8}")
                    continue
                fn_cy = getattr(_ext, {"apply": "apply_op"}.get(op, op))
                t_cy = _time(fn_cy, *args)
                print(f"{n:>6} {op:>12} {t_py * 1e6:>10.1f} {t_cy * 1e6:>10.1f} "
                      f"{t_py / t_cy:>7.1f}x")
        if _ext is None:
            print("\ncompiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
