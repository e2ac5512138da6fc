"""Time each kernel under every importable backend.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import random
import string
import timeit

import numpy as np

from colt import kernels


def _cases(seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    hashes = rng.integers(0, 2**63, size=2000, dtype=np.uint64)
    a = rng.integers(0, 2**63, size=256, dtype=np.uint64) | np.uint64(1)
    b = rng.integers(0, 2**63, size=256, dtype=np.uint64)
    r = random.Random(seed)
    lines = ["".join(r.choice(string.ascii_lowercase + " ()=.") for _ in range(r.randint(20, 80)))
             for _ in range(200)]
    query = np.unique(rng.integers(0, 5000, size=150, dtype=np.uint64))
    sets = [np.unique(rng.integers(0, 5000, size=150, dtype=np.uint64)) for _ in range(2000)]
    offsets = np.cumsum([0] + [len(s) for s in sets]).astype(np.int64)
    pool = np.concatenate(sets)
    return {
        "minhash (2000 shingles x 256 perms)": lambda m: m.minhash(hashes, a, b),
        "levenshtein (100 line pairs)": lambda m: [m.levenshtein(x, y)
                                                   for x, y in zip(lines[::2], lines[1::2])],
        "jaccard_many (2000 windows)": lambda m: m.jaccard_many(query, pool, offsets),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    found = kernels.backends()
    print(f"selected backend: {kernels.BACKEND}")
    print(f"{'kernel':40s}" + "".join(f"{n:>12s}" for n in found) + f"{'speedup':>10s}")
    for name, fn in _cases().items():
        best = {n: min(timeit.repeat(lambda: fn(m), number=1, repeat=args.repeat))
                for n, m in found.items()}
        row = f"{name:40s}" + "".join(f"{best[n] * 1e3:10.2f}ms" for n in found)
        if "cython" in best:
            row += f"{best['python'] / best['cython']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
