# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same contract as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free

cnp.import_array()


def minhash(hashes, a, b):
    cdef const uint64_t[::1] hv = np.ascontiguousarray(hashes, dtype=np.uint64)
    cdef const uint64_t[::1] av = np.ascontiguousarray(a, dtype=np.uint64)
    cdef const uint64_t[::1] bv = np.ascontiguousarray(b, dtype=np.uint64)
    cdef Py_ssize_t k = av.shape[0]
    cdef Py_ssize_t n = hv.shape[0]
    out = np.full(k, 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)
    cdef uint64_t[::1] ov = out
    cdef Py_ssize_t i, j
    cdef uint64_t h, v
    with nogil:
        for j in range(n):
            h = hv[j]
            for i in range(k):
                v = av[i] * h + bv[i]
                if v < ov[i]:
                    ov[i] = v
    return out


cdef Py_ssize_t _lev(const Py_UCS4* s, Py_ssize_t n, const Py_UCS4* t, Py_ssize_t m,
                     Py_ssize_t* row) nogil:
    cdef Py_ssize_t i, j, prev_diag, tmp, best
    for j in range(m + 1):
        row[j] = j
    for i in range(1, n + 1):
        prev_diag = row[0]
        row[0] = i
        for j in range(1, m + 1):
            tmp = row[j]
            best = prev_diag + (0 if s[i - 1] == t[j - 1] else 1)
            if row[j] + 1 < best:
                best = row[j] + 1
            if row[j - 1] + 1 < best:
                best = row[j - 1] + 1
            row[j] = best
            prev_diag = tmp
    return row[m]


def levenshtein(str a, str b):
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    cdef Py_ssize_t n = len(a), m = len(b)
    if m == 0:
        return n
    cdef Py_UCS4* s = <Py_UCS4*>malloc(n * sizeof(Py_UCS4))
    cdef Py_UCS4* t = <Py_UCS4*>malloc(m * sizeof(Py_UCS4))
    cdef Py_ssize_t* row = <Py_ssize_t*>malloc((m + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t i, res
    if s == NULL or t == NULL or row == NULL:
        free(s); free(t); free(row)
        raise MemoryError()
    try:
        for i in range(n):
            s[i] = a[i]
        for i in range(m):
            t[i] = b[i]
        with nogil:
            res = _lev(s, n, t, m, row)
    finally:
        free(s); free(t); free(row)
    return res


cdef double _jac(const uint64_t* a, Py_ssize_t na, const uint64_t* b, Py_ssize_t nb) nogil:
    cdef Py_ssize_t i = 0, j = 0, inter = 0
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    while i < na and j < nb:
        if a[i] == b[j]:
            inter += 1
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return <double>inter / <double>(na + nb - inter)


def jaccard_sorted(a, b):
    cdef const uint64_t[::1] av = np.ascontiguousarray(a, dtype=np.uint64)
    cdef const uint64_t[::1] bv = np.ascontiguousarray(b, dtype=np.uint64)
    cdef Py_ssize_t na = av.shape[0], nb = bv.shape[0]
    if na == 0 or nb == 0:
        return 1.0 if na == nb else 0.0
    return _jac(&av[0], na, &bv[0], nb)


def jaccard_many(query, pool, offsets):
    cdef const uint64_t[::1] qv = np.ascontiguousarray(query, dtype=np.uint64)
    cdef const uint64_t[::1] pv = np.ascontiguousarray(pool, dtype=np.uint64)
    cdef const int64_t[::1] ov = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t n = ov.shape[0] - 1
    out = np.empty(max(n, 0), dtype=np.float64)
    cdef double[::1] res = out
    cdef Py_ssize_t i, lo, hi, nq = qv.shape[0]
    cdef uint64_t dummy = 0
    cdef const uint64_t* qp = &qv[0] if nq > 0 else &dummy
    cdef const uint64_t* pp = &pv[0] if pv.shape[0] > 0 else &dummy
    with nogil:
        for i in range(n):
            lo = ov[i]
            hi = ov[i + 1]
            res[i] = _jac(qp, nq, pp + lo, hi - lo)
    return out
