"""Time the numba and numpy kernel backends on simulation-sized inputs.

    python benchmarks/bench_kernels.py [--m 4096] [--rows 512] [--repeat 5]

Also times one end-to-end simulation cell per backend by re-running this
script in a subprocess with ADAPTFDR_DISABLE_NUMBA set.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from adaptfdr import _kernels as K
from adaptfdr.procedures import ms_constants


def kernel_inputs(rows, m, seed=0):
    rng = np.random.default_rng(seed)
    sp = np.ascontiguousarray(np.sort(rng.random((rows, m)) ** 2, axis=1))
    return {
        "stepdown_count": (sp, ms_constants(m, 0.05).alphas),
        "stepup_count": (sp, np.arange(1, m + 1) * 0.05 / m),
        "stepup_linear_count": (sp, np.full(rows, 0.05), np.full(rows, 0.5)),
        "count_le": (sp, np.full(rows, 0.5)),
        "prefix_sum_at": (rng.integers(0, 2, size=(rows, m)), rng.integers(0, m + 1, size=rows)),
    }


def bench_kernels(rows, m, repeat):
    args = kernel_inputs(rows, m)
    backends = {"numpy": K.implementations("numpy")}
    if K.HAVE_NUMBA:
        backends["numba"] = K.implementations("numba")
        for name, fn in backends["numba"].items():
            fn(*args[name])  # compile outside the timed region
    print(f"kernels: rows={rows} m={m}, best of {repeat} (ms)")
    print(f"{'kernel':<22}" + "".join(f"{b:>10}" for b in backends) + "   speedup")
    for name in args:
        times = {}
        for b, impl in backends.items():
            t = timeit.repeat(lambda: impl[name](*args[name]), number=1, repeat=repeat)
            times[b] = min(t) * 1e3
        speed = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        print(f"{name:<22}" + "".join(f"{times[b]:>10.3f}" for b in backends) + f"{speed:>9.1f}x")


def bench_cell(m, reps):
    from adaptfdr.simulate import Scenario, run_experiment

    s = Scenario(m=m, pi0=0.5, reps=reps)
    run_experiment([Scenario(m=m, pi0=0.5, reps=8)], workers=1)  # warm-up
    t = timeit.timeit(lambda: run_experiment([s], workers=1), number=1)
    print(f"cell m={m} reps={reps} backend={K.BACKEND}: {t:.2f} s")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=int, default=4096)
    ap.add_argument("--rows", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--cell-only", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.cell_only:
        bench_cell(args.m, args.reps)
        return
    bench_kernels(args.rows, args.m, args.repeat)
    print(flush=True)
    for flag in ("0", "1"):
        env = dict(os.environ, ADAPTFDR_DISABLE_NUMBA=flag)
        subprocess.run([sys.executable, __file__, "--cell-only", "--m", str(args.m), "--reps", str(args.reps)],
                       env=env, check=True)


if __name__ == "__main__":
    main()
