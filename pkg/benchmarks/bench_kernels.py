"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one tab-separated line per (kernel, backend): median seconds per call
and the speedup of the compiled version.
"""
from __future__ import annotations

import argparse
import statistics
import timeit

import numpy as np

from sslfuse.kernels import _fallback

try:
    from sslfuse.kernels import _native
except ImportError:
    _native = None


def workloads(rng):
    x = rng.standard_normal((200, 30))
    log_probs = x - np.log(np.exp(x).sum(axis=1, keepdims=True))
    labels = rng.integers(1, 30, size=60).astype(np.int64)
    ref = rng.integers(0, 50, size=120).astype(np.int64)
    hyp = rng.integers(0, 50, size=110).astype(np.int64)
    return {
        "ctc_forward_backward T=200 |y|=60 V=30": lambda m: m.ctc_forward_backward(log_probs, labels, 0),
        "edit_table 120x110": lambda m: m.edit_table(ref, hyp),
    }


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--number", type=int, default=5)
    args = ap.parse_args(argv)
    backends = [("python", _fallback)] + ([("native", _native)] if _native else [])
    print("kernel\tbackend\tseconds_per_call\tspeedup")
    for name, fn in workloads(np.random.default_rng(0)).items():
        base = None
        for label, mod in backends:
            times = timeit.repeat(lambda: fn(mod), repeat=args.repeat, number=args.number)
            t = statistics.median(times) / args.number
            base = base or t
            print(f"{name}\t{label}\t{t:.6f}\t{base / t:.1f}x")
    if _native is None:
        print("compiled kernels not built; only the fallback was timed")


if __name__ == "__main__":
    main()
