"""Pure-Python / numpy implementations of the hot kernels.

Loaded when the compiled extension is unavailable, or when
``COLT_PURE_PYTHON=1`` is set. Signatures mirror ``_ckernels.pyx``.
"""

import numpy as np

_U64_MAX = np.uint64(0xFFFFFFFFFFFFFFFF)


def minhash(hashes, a, b):
    """Componentwise minimum of ``a * h + b (mod 2**64)`` over ``hashes``."""
    hashes = np.asarray(hashes, dtype=np.uint64)
    out = np.full(a.shape[0], _U64_MAX, dtype=np.uint64)
    if hashes.size == 0:
        return out
    # chunked so the (chunk x perms) intermediate stays small
    for start in range(0, hashes.size, 512):
        chunk = hashes[start:start + 512]
        vals = chunk[:, None] * a[None, :] + b[None, :]
        np.minimum(out, vals.min(axis=0), out=out)
    return out


def levenshtein(a, b):
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cost = 0 if ca == cb else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def jaccard_sorted(a, b):
    """Jaccard of two sorted, duplicate-free uint64 arrays."""
    na, nb = len(a), len(b)
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    inter = np.intersect1d(a, b, assume_unique=True).size
    return inter / (na + nb - inter)


def jaccard_many(query, pool, offsets):
    """Jaccard of ``query`` against each ``pool[offsets[i]:offsets[i+1]]``."""
    n = len(offsets) - 1
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = jaccard_sorted(query, pool[offsets[i]:offsets[i + 1]])
    return out
