# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled joint-typicality search over a codebook."""
import numpy as np

ctypedef long long i64


def typical_rows(const i64[:, ::1] book, const i64[::1] seq, i64 nb,
                 const i64[::1] lo, const i64[::1] hi, Py_ssize_t max_hits=0):
    cdef Py_ssize_t m = book.shape[0]
    cdef Py_ssize_t n = book.shape[1]
    cdef Py_ssize_t k = lo.shape[0]
    cdef Py_ssize_t r, i, j, nhit = 0
    cdef i64 cell
    cdef bint ok
    if seq.shape[0] != n:
        raise ValueError("sequence length does not match codebook block length")
    counts = np.zeros(k, dtype=np.int64)
    out = np.empty(m, dtype=np.int64)
    cdef i64[::1] c = counts
    cdef i64[::1] o = out
    with nogil:
        for r in range(m):
            for j in range(k):
                c[j] = 0
            ok = True
            for i in range(n):
                cell = book[r, i] * nb + seq[i]
                c[cell] += 1
                if c[cell] > hi[cell]:
                    ok = False
                    break
            if ok:
                for j in range(k):
                    if c[j] < lo[j]:
                        ok = False
                        break
            if ok:
                o[nhit] = r
                nhit += 1
                if max_hits > 0 and nhit >= max_hits:
                    break
    return out[:nhit].copy()
