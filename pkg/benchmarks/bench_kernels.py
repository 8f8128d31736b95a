"""Timing comparison of the pure-numpy and compiled numeric kernels.

Runs each kernel on shapes representative of the solver workload (many
tiny constraint blocks, one medium ball block, eigenvalue stacks from
simplex sampling) and prints per-call times for both implementations.
With --end-to-end it also times a full feasibility solve under each
backend in a subprocess, since the backend is chosen at import time.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--end-to-end]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from plmirelax import _purekernels

try:
    from plmirelax import _kernels
except ImportError:
    _kernels = None


def rand_spd_stack(rng, c, m, shift=0.5):
    g = rng.normal(size=(c, m, m))
    return np.einsum("cij,ckj->cik", g, g) + shift * np.eye(m)


def best_of(fn, repeat, number):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        times.append((time.perf_counter() - t0) / number)
    return min(times)


def cases(rng):
    # amgm:q4 stabilization group: 193 blocks of size 2, 10 variables
    S_small = rand_spd_stack(rng, 193, 2)
    A_small = rng.normal(size=(193, 10, 2, 2))
    A_small = A_small + A_small.transpose(0, 1, 3, 2)
    # a coarser group with bigger blocks
    S_big = rand_spd_stack(rng, 50, 8)
    A_big = rng.normal(size=(50, 20, 8, 8))
    A_big = A_big + A_big.transpose(0, 1, 3, 2)
    # ball block shape and its derivative directions
    S_ball = rand_spd_stack(rng, 1, 10)[0]
    dirs = rng.normal(size=(10, 10, 10))
    dirs = dirs + dirs.transpose(0, 2, 1)
    # simplex soundness sampling evaluates ~1000 small matrices at once
    stack = rand_spd_stack(rng, 1006, 2) - 2.0 * np.eye(2)
    sym8 = rng.normal(size=(8, 8))
    sym8 = sym8 + sym8.T
    return [
        ("group_terms c=193 m=2 n=10", lambda k: k.group_terms(S_small, A_small), 50),
        ("group_terms c=50 m=8 n=20", lambda k: k.group_terms(S_big, A_big), 20),
        ("group_logdet c=193 m=2", lambda k: k.group_logdet(S_small), 200),
        ("barrier_terms m=10 p=10", lambda k: k.barrier_terms(S_ball, dirs), 200),
        ("max_eigvals 1006x2x2", lambda k: k.max_eigvals(stack), 50),
        ("jacobi_eigh m=8", lambda k: k.jacobi_eigh(sym8), 500),
    ]


def run_kernels(repeat):
    rng = np.random.default_rng(0)
    impls = [("pure", _purekernels)]
    if _kernels is not None:
        impls.append(("compiled", _kernels))
    else:
        print("compiled extension not built; timing the pure backend only")
    width = max(len(name) for name, _, _ in cases(rng))
    header = f"{'kernel':<{width}}  " + "".join(f"{n:>12}" for n, _ in impls)
    print(header + ("  speedup" if len(impls) == 2 else ""))
    for name, call, number in cases(rng):
        per = []
        for _, impl in impls:
            per.append(best_of(lambda: call(impl), repeat, number))
        line = f"{name:<{width}}  " + "".join(f"{t * 1e6:>10.1f}us" for t in per)
        if len(per) == 2:
            line += f"  {per[0] / per[1]:>6.2f}x"
        print(line)


def run_end_to_end():
    cmd = [
        sys.executable, "-m", "plmirelax", "solve",
        "--example", "0", "0", "--fold", "4", "--method", "amgm",
    ]
    for backend in ("pure", "compiled"):
        if backend == "compiled" and _kernels is None:
            continue
        env = {**os.environ, "PLMIRELAX_BACKEND": backend}
        t0 = time.perf_counter()
        out = subprocess.run(cmd, env=env, capture_output=True, text=True)
        wall = time.perf_counter() - t0
        status = next(
            (l for l in out.stdout.splitlines() if l.startswith("status:")), "?"
        )
        print(f"solve amgm:q4 [{backend:>8}] {wall * 1e3:7.1f} ms  {status}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="best-of repeats")
    ap.add_argument(
        "--end-to-end", action="store_true",
        help="also time a full solve under each backend",
    )
    args = ap.parse_args(argv)
    run_kernels(args.repeat)
    if args.end_to_end:
        print()
        run_end_to_end()


if __name__ == "__main__":
    main()
