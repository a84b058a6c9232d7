"""Timing comparison of the compiled and pure-Python kernel backends.

Runs each hot kernel through both implementations in-process and, for the
end-to-end rows, through subprocesses so the TOPL_PURE switch can pick the
backend at import time.  Usage:

    python benchmarks/bench_kernels.py            # default sizes
    python benchmarks/bench_kernels.py --repeat 5
    python benchmarks/bench_kernels.py --skip-e2e # kernel rows only
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from topl._core import _pykernels as pure

try:
    from topl._core import _kernels as fast
except ImportError:
    fast = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases():
    grid = np.linspace(0.01, 60.0, 1_000_000)
    out = np.empty_like(grid)
    ys = np.linspace(1e-6, 1.0 - 1e-6, 20_000)

    def ppf_sweep(mod):
        x = -1.0
        for y in ys:
            x = mod.beta_ppf(2, 5_000, y, x)

    return [
        ("layer_shot ell=1 n=20000", lambda m: m.layer_shot(1, 20_000, 1, 1.3415 / 20_000, None)),
        ("layer_shot ell=2 n=10000", lambda m: m.layer_shot(2, 10_000, 1, 2.0704 / 10_000, None)),
        ("ode_shot ell=1 mesh=20000", lambda m: m.ode_shot(1, 20_000, 1.341489, 0.0, None)),
        ("ode_shot ell=2 mesh=10000", lambda m: m.ode_shot(2, 10_000, 2.07035, 0.0, None)),
        ("gamma_comp_arr 1e6", lambda m: m.gamma_comp_arr(2, grid, out)),
        ("beta_ppf warm sweep 2e4", ppf_sweep),
    ]


E2E_SNIPPETS = [
    (
        "solve_partition n=20000 ell=2",
        "from topl.bvp import solve_partition; solve_partition(20000, 2)",
    ),
    (
        "solve_ode_system k=2 mesh=20000",
        "from topl.multibvp import solve_ode_system; solve_ode_system(2, 1, mesh_size=20000)",
    ),
]


def time_subprocess(snippet, pure_backend):
    env = dict(os.environ, TOPL_PURE="1" if pure_backend else "0")
    code = (
        "import time\n"
        "t0 = time.perf_counter()\n"
        f"{snippet}\n"
        "print(time.perf_counter() - t0)\n"
    )
    proc = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    return float(proc.stdout.strip())


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3, help="timings per row, best kept")
    parser.add_argument("--skip-e2e", action="store_true", help="kernel rows only")
    args = parser.parse_args(argv)

    if fast is None:
        print("compiled backend unavailable; showing pure-Python times only")

    width = max(len(name) for name, _ in kernel_cases() + E2E_SNIPPETS)
    header = f"{'case':<{width}}  {'python':>10}  {'cython':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))

    for name, fn in kernel_cases():
        t_pure = best_of(lambda: fn(pure), args.repeat)
        if fast is None:
            print(f"{name:<{width}}  {t_pure:>9.4f}s  {'n/a':>10}  {'n/a':>8}")
            continue
        t_fast = best_of(lambda: fn(fast), args.repeat)
        print(f"{name:<{width}}  {t_pure:>9.4f}s  {t_fast:>9.4f}s  {t_pure / t_fast:>7.1f}x")

    if not args.skip_e2e:
        for name, snippet in E2E_SNIPPETS:
            t_pure = min(time_subprocess(snippet, True) for _ in range(args.repeat))
            if fast is None:
                print(f"{name:<{width}}  {t_pure:>9.4f}s  {'n/a':>10}  {'n/a':>8}")
                continue
            t_fast = min(time_subprocess(snippet, False) for _ in range(args.repeat))
            print(f"{name:<{width}}  {t_pure:>9.4f}s  {t_fast:>9.4f}s  {t_pure / t_fast:>7.1f}x")


if __name__ == "__main__":
    main()
