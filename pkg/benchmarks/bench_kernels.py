"""Compare the numpy and numba kernel backends.

Times the elementwise probit kernels directly on both implementations, then
(optionally) one short solve per backend in a fresh interpreter, since the
backend is fixed at import time by ONEBIT_SPICE_BACKEND.

    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --sizes 128x1024 512x8192 --solve
    python benchmarks/bench_kernels.py --scaling 64 128 256
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from onebit_spice.kernels import _numpy, available_backends

SOLVE_SNIPPET = """
import time, numpy as np
from onebit_spice import kernels
from onebit_spice.experiment import ExperimentConfig, synthesize
from onebit_spice.model import CpiConfig, build_dictionaries
from onebit_spice.spice_1b import SolverOptions, solve
cfg = ExperimentConfig(cpi=CpiConfig({n}, {m}))
sim = synthesize(cfg, -30.0, 0)
dicts = build_dictionaries(cfg.pulse(), cfg.cpi)
solve(sim.cpi, dicts, SolverOptions(max_iter=1))  # warm up / compile
t0 = time.perf_counter()
res = solve(sim.cpi, dicts, SolverOptions(max_iter={iters}))
dt = time.perf_counter() - t0
print(kernels.BACKEND, dt, res.s_hat.sum())
"""


def best_of(fn, repeat):
    fn()  # compile / warm caches
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(n, m, rng):
    z = np.where(rng.standard_normal((n, m)) >= 0, 1.0, -1.0)
    mean = rng.standard_normal((n, m)) * 2.0
    levels = np.linspace(-1.0, 1.0, m)
    x = rng.uniform(-40.0, 40.0, n * m)
    return {
        "normal_ratio": lambda mod: mod.normal_ratio(x),
        "surrogate": lambda mod: mod.surrogate(z, mean, levels, 1.3),
        "nll": lambda mod: mod.nll(z, mean, levels, 1.3),
        "positive_counts": lambda mod: mod.positive_counts(z),
    }


def run_kernels(sizes, repeat):
    backends = available_backends()
    if "numba" not in backends:
        print("numba not importable; only the numpy backend is timed")
    rng = np.random.default_rng(0)
    print(f"{'size':>12s} {'kernel':>16s} " + " ".join(f"{b:>12s}" for b in backends)
          + "   speedup")
    for n, m in sizes:
        for name, call in kernel_cases(n, m, rng).items():
            times = {b: best_of(lambda mod=mod: call(mod), repeat) for b, mod in backends.items()}
            ref = call(_numpy)
            for b, mod in backends.items():
                # both paths must agree before their timings mean anything
                np.testing.assert_allclose(call(mod), ref, rtol=1e-12, atol=0)
            cols = " ".join(f"{times[b] * 1e3:10.3f}ms" for b in backends)
            speed = times["numpy"] / times["numba"] if "numba" in times else float("nan")
            print(f"{n:>5d}x{m:<6d} {name:>16s} {cols}   {speed:6.2f}x")


def run_solves(sizes, iters):
    for n, m in sizes:
        for backend in available_backends():
            env = dict(os.environ, ONEBIT_SPICE_BACKEND=backend)
            out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(n=n, m=m, iters=iters)],
                                 env=env, capture_output=True, text=True, check=True)
            name, dt, check = out.stdout.split()
            print(f"solve {n}x{m} {iters} iterations [{name}]: {float(dt):.3f} s "
                  f"(checksum {float(check):.6g})")


def run_scaling(ns, m_slow, iters):
    """Per-iteration solve time against N; the covariance factorization is O(N^3)."""
    from onebit_spice.experiment import ExperimentConfig, synthesize
    from onebit_spice.model import CpiConfig, build_dictionaries
    from onebit_spice.spice_1b import SolverOptions, solve

    prev = None
    for n in ns:
        cfg = ExperimentConfig(cpi=CpiConfig(n, m_slow))
        sim = synthesize(cfg, -30.0, 0)
        dicts = build_dictionaries(cfg.pulse(), cfg.cpi)
        solve(sim.cpi, dicts, SolverOptions(max_iter=1))  # warm up / compile
        t0 = time.perf_counter()
        solve(sim.cpi, dicts, SolverOptions(max_iter=iters, tol=1e-12))
        per_iter = (time.perf_counter() - t0) / iters
        growth = "" if prev is None else f"  x{per_iter / prev[1]:.2f} for N x{n / prev[0]:.0f}"
        print(f"N={n:5d} M={m_slow}: {per_iter * 1e3:8.2f} ms/iteration{growth}")
        prev = (n, per_iter)


def parse_size(text):
    n, m = text.lower().split("x")
    return int(n), int(m)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", nargs="+", type=parse_size, default=[(128, 1024), (512, 8192)])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--solve", action="store_true", help="also time a short solve per backend")
    ap.add_argument("--iters", type=int, default=10)
    ap.add_argument("--scaling", nargs="+", type=int, metavar="N",
                    help="only time solve iterations against these N (M fixed at 1024)")
    args = ap.parse_args()
    if args.scaling:
        run_scaling(args.scaling, 1024, args.iters)
        return
    run_kernels(args.sizes, args.repeat)
    if args.solve:
        run_solves(args.sizes, args.iters)


if __name__ == "__main__":
    main()
