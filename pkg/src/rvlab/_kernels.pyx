# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops.

Every function here has a twin in :mod:`rvlab._fallback` with the same
signature; uniform draws are bit-identical between the two.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.math cimport log

cnp.import_array()

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef uint64_t M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t M2 = 0x94D049BB133111EBULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef double HALF_ULP = 0.5 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t key, uint64_t counter) noexcept nogil:
    cdef uint64_t z = _mix(key + (counter + 1) * GAMMA)
    return <double>(z >> 11) * TWO_M53 + HALF_ULP


BACKEND = "compiled"


def uniform_fill(uint64_t key, int64_t start, int64_t count):
    """Uniforms in (0, 1) for counters ``start .. start + count - 1``."""
    out = np.empty(count, dtype=np.float64)
    cdef double[::1] o = out
    cdef int64_t i
    with nogil:
        for i in range(count):
            o[i] = _uniform(key, <uint64_t>(start + i))
    return out


def block_min_counts(uint64_t key, int64_t start_rep, int64_t reps, int64_t n,
                     thresholds):
    """Per replicate: minimum of ``n`` uniforms and counts below each threshold.

    Replicate ``r`` consumes counters ``(start_rep + r) * n + j`` for
    ``j < n``.  ``thresholds`` must be sorted ascending.
    """
    cdef double[::1] thr = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef int64_t m = thr.shape[0]
    mins = np.empty(reps, dtype=np.float64)
    counts = np.zeros((reps, m), dtype=np.int64)
    cdef double[::1] mn = mins
    cdef int64_t[:, ::1] cnt = counts
    cdef int64_t r, j, c, lo, hi, mid
    cdef uint64_t base
    cdef double u, best
    cdef double top = thr[m - 1] if m > 0 else 0.0
    with nogil:
        for r in range(reps):
            base = <uint64_t>((start_rep + r) * n)
            best = 2.0
            for j in range(n):
                u = _uniform(key, base + <uint64_t>j)
                if u < best:
                    best = u
                if m > 0 and u < top:
                    # first threshold strictly above u
                    lo = 0
                    hi = m - 1
                    while lo < hi:
                        mid = (lo + hi) >> 1
                        if thr[mid] > u:
                            hi = mid
                        else:
                            lo = mid + 1
                    cnt[r, lo] += 1
            mn[r] = best
            # cumulative: counts[r, c] = #{u < thr[c]}
            for c in range(1, m):
                cnt[r, c] += cnt[r, c - 1]
    return mins, counts


def sliding_range(values, int64_t w):
    """Row-wise max over windows of ``w + 1`` consecutive nodes of (max - min)."""
    cdef double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef int64_t rows = v.shape[0]
    cdef int64_t g = v.shape[1]
    out = np.zeros(rows, dtype=np.float64)
    cdef double[::1] o = out
    cdef int64_t r, i, j, stop
    cdef double hi, lo, best, x
    if w <= 0:
        return out
    with nogil:
        for r in range(rows):
            best = 0.0
            for i in range(g - 1):
                hi = v[r, i]
                lo = hi
                stop = i + w + 1
                if stop > g:
                    stop = g
                for j in range(i + 1, stop):
                    x = v[r, j]
                    if x > hi:
                        hi = x
                    elif x < lo:
                        lo = x
                if hi - lo > best:
                    best = hi - lo
            o[r] = best
    return out


def hill_log_sum(double[::1] top_desc, int64_t k):
    """Sum of log(X_(i) / X_(k+1)) over the ``k`` largest values."""
    cdef double s = 0.0
    cdef double ref = top_desc[k]
    cdef int64_t i
    with nogil:
        for i in range(k):
            s += log(top_desc[i] / ref)
    return s
