"""Time the hot kernels under the numba and pure-numpy backends.

The backend is fixed at import time, so each one runs in its own
subprocess with ``POSTFIXGP_DISABLE_NUMBA`` set accordingly.

    python3 benchmarks/bench_kernels.py [--genomes 500] [--rows 100] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best_of(fn, repeat):
    fn()  # warm-up, includes any JIT compile or cache load
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def measure(n_genomes, n_rows, repeat):
    from postfixgp import _accel, kernels
    from postfixgp.genome import PrimitiveSet, random_genome, span_starts

    pset = PrimitiveSet(("x",), (1, 2, 3, 5, 7), ("+", "-", "*", "/"), ("sin", "cos", "exp", "log", "sqrt"))
    rng = np.random.default_rng(0)
    genomes = [random_genome(pset, 15, 35, rng) for _ in range(n_genomes)]
    tokens = np.stack([g.tokens for g in genomes])
    vlens = np.array([g.valid_length for g in genomes])
    X = rng.uniform(-10, 10, size=(n_rows, 1))
    lo, hi = X.min(axis=0), X.max(axis=0)
    tables = (pset.kind, pset.code, pset.const_array)

    def evaluate():
        kernels.eval_batch(tokens, vlens, *tables, X)

    def validate():
        for g in genomes:
            kernels.valid_length(g.tokens, pset.arity_table, g.capacity)

    def spans():
        for g in genomes:
            span_starts(g, pset)

    def screen():
        for g in genomes:
            kernels.interval_feasible(g.tokens, g.valid_length, *tables, lo, hi)

    return {
        "backend": _accel.backend_name(),
        "eval_batch": _best_of(evaluate, repeat),
        "valid_length": _best_of(validate, repeat),
        "span_starts": _best_of(spans, repeat),
        "interval_feasible": _best_of(screen, repeat),
    }


def run_backend(disable, args):
    env = dict(os.environ)
    env.pop("POSTFIXGP_DISABLE_NUMBA", None)
    if disable:
        env["POSTFIXGP_DISABLE_NUMBA"] = "1"
    cmd = [sys.executable, __file__, "--child", "--genomes", str(args.genomes),
           "--rows", str(args.rows), "--repeat", str(args.repeat)]
    out = subprocess.run(cmd, env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--genomes", type=int, default=500)
    parser.add_argument("--rows", type=int, default=100)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.child:
        print(json.dumps(measure(args.genomes, args.rows, args.repeat)))
        return

    jit = run_backend(False, args)
    ref = run_backend(True, args)
    print(f"{args.genomes} genomes, {args.rows} rows, best of {args.repeat}")
    print(f"{'kernel':<18}{jit['backend'] + ' (ms)':>14}{ref['backend'] + ' (ms)':>14}{'speed-up':>10}")
    for key in ("eval_batch", "valid_length", "span_starts", "interval_feasible"):
        a, b = jit[key] * 1e3, ref[key] * 1e3
        print(f"{key:<18}{a:>14.3f}{b:>14.3f}{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
