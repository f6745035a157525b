# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: principal-value circular convolution, per-segment
minimal qualifying windows, and hull-restricted oscillation sweeps.

`oscbox._kernels_py` carries the reference numpy implementations of the
same contracts; `oscbox._backend` picks whichever is available.
"""

from libc.math cimport INFINITY

import numpy as np

cimport numpy as cnp

cnp.import_array()

IMPL = "cython"


def circular_convolve_pv(kern, vals):
    """out[i] = (1/n) * sum_j kern[(i-j) mod n] * vals[j]; kern[0] must be 0
    so the diagonal term drops (principal value)."""
    cdef const double[::1] k = np.ascontiguousarray(kern, dtype=np.float64)
    cdef const double[::1] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, m
    cdef double acc, inv_n = 1.0 / n
    for i in range(n):
        acc = 0.0
        for j in range(n):
            m = i - j
            if m < 0:
                m += n
            acc += k[m] * v[j]
        out[i] = acc * inv_n
    return out_arr


def segment_min_window(sv, cw, starts, ends, thresholds):
    """Per segment: minimal range sv[j]-sv[i] over windows [i, j] inside the
    segment whose weight sum exceeds the segment threshold strictly.

    sv must be sorted within each segment (segments nonempty); cw is the
    global inclusive cumsum of the matching weights. Segments with no qualifying window return inf.
    """
    cdef const double[::1] v = np.ascontiguousarray(sv, dtype=np.float64)
    cdef const double[::1] c = np.ascontiguousarray(cw, dtype=np.float64)
    cdef const long long[::1] lo = np.ascontiguousarray(starts, dtype=np.int64)
    cdef const long long[::1] hi = np.ascontiguousarray(ends, dtype=np.int64)
    cdef const double[::1] thr = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef Py_ssize_t nseg = lo.shape[0]
    out_arr = np.empty(nseg, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t s, i, a, b, mid, seg_hi
    cdef double best, target, cand
    for s in range(nseg):
        seg_hi = hi[s]
        best = INFINITY
        for i in range(lo[s], seg_hi):
            target = (c[i - 1] if i > 0 else 0.0) + thr[s]
            # first index in [i, seg_hi) with cw > target (bisect right)
            a = i
            b = seg_hi
            while a < b:
                mid = (a + b) >> 1
                if c[mid] > target:
                    b = mid
                else:
                    a = mid + 1
            if a < seg_hi:
                cand = v[a] - v[i]
                if cand < best:
                    best = cand
        out[s] = best
    return out_arr


def hull_restricted_osc(kern, vals, tvals, ball_lo, ball_hi, hull_lo, hull_hi):
    """Per ball: oscillation over its leaf range of
    tvals - (1/n) * kern-convolution of vals restricted to the hull range.
    kern[0] must be 0."""
    cdef const double[::1] k = np.ascontiguousarray(kern, dtype=np.float64)
    cdef const double[::1] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef const double[::1] t = np.ascontiguousarray(tvals, dtype=np.float64)
    cdef const long long[::1] blo = np.ascontiguousarray(ball_lo, dtype=np.int64)
    cdef const long long[::1] bhi = np.ascontiguousarray(ball_hi, dtype=np.int64)
    cdef const long long[::1] hlo = np.ascontiguousarray(hull_lo, dtype=np.int64)
    cdef const long long[::1] hhi = np.ascontiguousarray(hull_hi, dtype=np.int64)
    cdef Py_ssize_t n = v.shape[0], nb = blo.shape[0]
    out_arr = np.empty(nb, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t b, i, j, m
    cdef double acc, val, vmin, vmax, inv_n = 1.0 / n
    for b in range(nb):
        vmin = INFINITY
        vmax = -INFINITY
        for i in range(blo[b], bhi[b]):
            acc = 0.0
            for j in range(hlo[b], hhi[b]):
                m = i - j
                if m < 0:
                    m += n
                acc += k[m] * v[j]
            val = t[i] - acc * inv_n
            if val < vmin:
                vmin = val
            if val > vmax:
                vmax = val
        out[b] = vmax - vmin
    return out_arr
