"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--states 200000] [--repeat 5]

Prints one line per kernel with the best-of-``repeat`` wall time of each
backend and the speedup.  The first numba call (compilation) is excluded.
"""
import argparse
import time

import numpy as np

from cptransfer import _kernels as K
from cptransfer.channels import random_mixed_unitary, random_povm
from cptransfer.matkernel import random_cone_batch, random_density_hs


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--states", type=int, default=200_000)
    ap.add_argument("--word-length", type=int, default=12)
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    c = random_mixed_unitary(3, 2, rng)
    povm = random_povm(3, 2, rng)
    rho = random_density_hs(2, rng)
    states = random_cone_batch(2, args.states, rng)
    words = rng.integers(0, 3, size=(args.states, args.word_length))
    idx = rng.integers(0, 3, size=args.steps)
    uniforms = rng.random((args.states // 10, args.word_length))

    cases = [
        ("conjugate_batch", lambda m: m(states, c.unitaries, c.probs)),
        ("apply_words", lambda m: m(rho, c.unitaries, c.probs, words)),
        ("apply_words_multi", lambda m: m(states, c.unitaries, c.probs, words)),
        ("walk_place_dependent", lambda m: m(rho, c.unitaries, povm, uniforms)),
        ("trajectory", lambda m: m(rho, c.unitaries, idx)),
    ]
    print(f"{'kernel':<22} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8}")
    for name, call in cases:
        fast = getattr(K, name + "_numba")
        slow = getattr(K, name + "_numpy")
        call(fast)  # compile
        tf = best_of(lambda: call(fast), args.repeat)
        ts = best_of(lambda: call(slow), args.repeat)
        print(f"{name:<22} {tf:10.4f} {ts:10.4f} {ts / tf:8.1f}x")


if __name__ == "__main__":
    main()
