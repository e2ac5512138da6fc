import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colt import kernels
from colt.kernels import _pykernels

BACKENDS = kernels.backends()

u64 = st.integers(0, 2**64 - 1)


def _dp(a, b):
    prev = list(range(len(b) + 1))
    for i in range(1, len(a) + 1):
        cur = [i] + [0] * len(b)
        for j in range(1, len(b) + 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1]))
        prev = cur
    return prev[-1]


def test_backend_selection_is_reported():
    assert kernels.BACKEND in BACKENDS
    assert "python" in BACKENDS


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_levenshtein_known_values(name):
    lev = BACKENDS[name].levenshtein
    assert lev("kitten", "sitting") == 3
    assert lev("", "abc") == 3
    assert lev("abc", "abc") == 0
    assert lev("é€x", "€x") == 1


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=15), st.text(max_size=15))
def test_levenshtein_backends_agree_with_dp(a, b):
    want = _dp(a, b)
    for mod in BACKENDS.values():
        assert mod.levenshtein(a, b) == want


@settings(max_examples=200, deadline=None)
@given(st.lists(u64, max_size=50), st.integers(0, 2**32))
def test_minhash_backends_agree(hashes, seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2**64, size=16, dtype=np.uint64) | np.uint64(1)
    b = rng.integers(0, 2**64, size=16, dtype=np.uint64)
    h = np.array(hashes, dtype=np.uint64)
    outs = [mod.minhash(h, a, b) for mod in BACKENDS.values()]
    with np.errstate(over="ignore"):
        if hashes:
            want = (h[:, None] * a[None, :] + b[None, :]).min(axis=0)
        else:
            want = np.full(16, np.uint64(2**64 - 1))
    for out in outs:
        assert out.dtype == np.uint64
        assert np.array_equal(out, want)


def _sorted_u64(values):
    return np.array(sorted(set(values)), dtype=np.uint64)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 40), max_size=30), st.lists(st.integers(0, 40), max_size=30))
def test_jaccard_sorted_matches_sets(x, y):
    sx, sy = set(x), set(y)
    if not sx and not sy:
        want = 1.0
    elif not sx or not sy:
        want = 0.0
    else:
        want = len(sx & sy) / len(sx | sy)
    for mod in BACKENDS.values():
        assert mod.jaccard_sorted(_sorted_u64(x), _sorted_u64(y)) == pytest.approx(want, abs=0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 30), max_size=20),
       st.lists(st.lists(st.integers(0, 30), max_size=20), max_size=8))
def test_jaccard_many_matches_pairwise(q, pool_sets):
    query = _sorted_u64(q)
    arrays = [_sorted_u64(p) for p in pool_sets]
    offsets = np.zeros(len(arrays) + 1, dtype=np.int64)
    np.cumsum([len(a) for a in arrays], out=offsets[1:])
    pool = np.concatenate(arrays) if arrays else np.zeros(0, dtype=np.uint64)
    want = [_pykernels.jaccard_sorted(query, a) for a in arrays]
    for mod in BACKENDS.values():
        assert list(mod.jaccard_many(query, pool, offsets)) == want
