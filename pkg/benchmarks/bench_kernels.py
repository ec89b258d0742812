"""Time the codebook typicality search under each available backend.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per (backend, codebook shape) with the best time per call and
the speedup of the compiled kernel over the numpy fallback.
"""
import argparse
import timeit

import numpy as np

from vldht.info import AuxChannel, dsbs, typical_count_bounds
from vldht.kernels import available_backends

SHAPES = [(256, 16), (4096, 16), (4096, 64), (65536, 24)]


def case(m, n, rng):
    joint = AuxChannel.symmetric(2, 0.2).joint_ux(dsbs(0.1)).joint
    lo, hi = typical_count_bounds(joint.ravel(), n, 0.5)
    book = rng.integers(0, 2, (m, n)).astype(np.int64)
    seq = rng.integers(0, 2, n).astype(np.int64)
    return book, seq, 2, lo.astype(np.int64), hi.astype(np.int64)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = available_backends()
    rng = np.random.default_rng(0)
    print(f"{'shape':>12} " + " ".join(f"{b:>12}" for b in sorted(backends)) + "   speedup")
    for m, n in SHAPES:
        book, seq, nb, lo, hi = case(m, n, rng)
        ref = None
        times = {}
        for name, fn in sorted(backends.items()):
            out = fn(book, seq, nb, lo, hi, 0)
            if ref is None:
                ref = out
            assert np.array_equal(out, ref), "backends disagree"
            number = max(1, int(2e6 // (m * n)))
            best = min(timeit.repeat(lambda: fn(book, seq, nb, lo, hi, 0),
                                     number=number, repeat=args.repeat))
            times[name] = best / number
        cells = " ".join(f"{times[b] * 1e3:10.3f}ms" for b in sorted(backends))
        speed = (f"{times['python'] / times['cython']:8.1f}x" if len(times) == 2 else "     n/a")
        print(f"{m:>6}x{n:<5} {cells} {speed}")


if __name__ == "__main__":
    main()
