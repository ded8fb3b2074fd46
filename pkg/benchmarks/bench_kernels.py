"""Compare the compiled string kernels against the pure-Python fallback.

Run with: python benchmarks/bench_kernels.py
"""

import random
import time

import numpy as np

from ocrflow import kernels
from ocrflow.kernels import _pure

try:
    from ocrflow.kernels import _speedups
except ImportError:
    _speedups = None


def _pairs(n, length, seed=7):
    rnd = random.Random(seed)
    glyphs = "abcdefghijklmnopqrstuvwxyz ſʒäöü"
    make = lambda: "".join(rnd.choice(glyphs) for _ in range(rnd.randint(length // 2, length)))
    return [(make(), make()) for _ in range(n)]


def _codepoint_pairs(pairs):
    return [
        (
            np.array([ord(c) for c in a], dtype=np.int32),
            np.array([ord(c) for c in b], dtype=np.int32),
        )
        for a, b in pairs
    ]


def _time(label, fn, repeats=3):
    best = min(_timed_once(fn) for _ in range(repeats))
    print(f"  {label:<14} {best * 1000:9.1f} ms")
    return best


def _timed_once(fn):
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


def bench(impl_name, impl, cp_pairs, argmax_rows):
    print(f"{impl_name}:")
    times = {}
    times["levenshtein"] = _time(
        "levenshtein", lambda: [impl.levenshtein_cp(a, b) for a, b in cp_pairs]
    )
    times["dp_matrix"] = _time(
        "dp_matrix", lambda: [impl.dp_matrix(a, b) for a, b in cp_pairs]
    )
    times["collapse"] = _time(
        "collapse", lambda: [impl.collapse_argmax(row, 0) for row in argmax_rows]
    )
    return times


def main():
    n, length = 2000, 60
    print(f"{n} string pairs, length ≤ {length}; {n} argmax rows, T = 120")
    print(f"active backend: {kernels.BACKEND}\n")

    cp_pairs = _codepoint_pairs(_pairs(n, length))
    rng = np.random.default_rng(7)
    argmax_rows = [
        rng.integers(0, 12, size=120).astype(np.int32) for _ in range(n)
    ]

    pure = bench("pure python", _pure, cp_pairs, argmax_rows)
    if _speedups is None:
        print("\ncompiled extension not built; nothing to compare")
        return
    fast = bench("cython", _speedups, cp_pairs, argmax_rows)

    print("\nspeedup (pure / cython):")
    for key in pure:
        print(f"  {key:<14} {pure[key] / fast[key]:6.1f}x")


if __name__ == "__main__":
    main()
