#!/usr/bin/env python3
"""Benchmark the compiled extension against the pure-Python fallback.

Runs the hot kernels on identical workloads through both implementations
and prints a table of timings plus the speedup. Invoke from the repository
root:

    python3 benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from editsim import _pykernels
from editsim.alphabet import Alphabet, Str
from editsim.automata import conditional_automaton, remove_epsilon
from editsim.transducer import MemorylessTransducer

try:
    from editsim import _ckernels
except ImportError:
    _ckernels = None


def random_model(alphabet, rng):
    n = alphabet.size
    probs = np.zeros((n + 1, n + 1))
    ins = rng.uniform(0.05, 0.3)
    probs[0, 1:] = rng.dirichlet(np.ones(n)) * ins
    probs[0, 0] = 1.0 - ins
    for a in range(1, n + 1):
        probs[a] = rng.dirichlet(np.ones(n + 1)) * (1.0 - ins)
    return MemorylessTransducer(probs, alphabet)


def random_codes(rng, size, length):
    return rng.integers(1, size + 1, size=length).astype(np.int32)


def build_workloads(seed=0):
    rng = np.random.default_rng(seed)
    ab = Alphabet(("a", "b", "c"))
    model = random_model(ab, rng)
    logc = model.log_probs
    probs = np.ascontiguousarray(np.random.default_rng(1).uniform(0.0, 2.0, (4, 4)))
    np.fill_diagonal(probs, 0.0)

    lev_pairs = [
        (random_codes(rng, 3, 40), random_codes(rng, 3, 40)) for _ in range(300)
    ]
    dp_pairs = [
        (random_codes(rng, 3, 30), random_codes(rng, 3, 30)) for _ in range(100)
    ]
    automata = []
    for _ in range(12):
        x = Str(random_codes(rng, 3, 16), ab)
        a = remove_epsilon(conditional_automaton(model, x))
        automata.append(
            (np.ascontiguousarray(a.weights), np.ascontiguousarray(a.rho))
        )

    def bench_lev(impl):
        for a, b in lev_pairs:
            impl.lev_distance(a, b)

    def bench_script(impl):
        for a, b in lev_pairs[:150]:
            impl.lev_script_counts(a, b, 4)

    def bench_weighted(impl):
        for a, b in lev_pairs[:150]:
            impl.weighted_distance(probs, a, b)

    def bench_forward(impl):
        for a, b in dp_pairs:
            impl.forward_log(logc, a, b)

    def bench_em(impl):
        delta = np.zeros((4, 4))
        for a, b in dp_pairs:
            impl.em_pair_counts(logc, a, b, delta)

    def bench_kernel(impl):
        for w1, r1 in automata[:6]:
            for w2, r2 in automata[6:]:
                impl.solve_kernel(w1, r1, w2, r2)

    return [
        ("levenshtein distance (300 pairs, len 40)", bench_lev),
        ("levenshtein script (150 pairs, len 40)", bench_script),
        ("weighted edit distance (150 pairs)", bench_weighted),
        ("forward DP (100 pairs, len 30)", bench_forward),
        ("EM pair counts (100 pairs, len 30)", bench_em),
        ("kernel solve (36 pairs, len 16)", bench_kernel),
    ]


def timeit(fn, impl, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(impl)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    workloads = build_workloads()
    name_w = max(len(name) for name, _ in workloads)
    print("%-*s %12s %12s %9s" % (name_w, "workload", "python", "compiled", "speedup"))
    for name, fn in workloads:
        t_py = timeit(fn, _pykernels, args.repeats)
        if _ckernels is None:
            print("%-*s %10.1f ms %12s" % (name_w, name, t_py * 1e3, "n/a"))
            continue
        t_c = timeit(fn, _ckernels, args.repeats)
        print(
            "%-*s %10.1f ms %10.1f ms %8.1fx"
            % (name_w, name, t_py * 1e3, t_c * 1e3, t_py / t_c)
        )
    if _ckernels is None:
        print("\ncompiled extension not available; built the fallback only")


if __name__ == "__main__":
    main()
