"""Numpy fallback for the compiled kernel core.

Same contracts as the Cython module `oscbox._kernels`; selected at import
by `oscbox._backend` when the extension is unavailable (or forced via
OSCBOX_PURE_PYTHON=1).
"""

from __future__ import annotations

import numpy as np

IMPL = "python"

_CIRC_CACHE: dict = {}
_CIRC_CACHE_MAX = 8


def _circulant(kern: np.ndarray) -> np.ndarray:
    key = (kern.shape[0], kern.tobytes())
    mat = _CIRC_CACHE.get(key)
    if mat is None:
        n = kern.shape[0]
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        mat = kern[idx]
        if len(_CIRC_CACHE) >= _CIRC_CACHE_MAX:
            _CIRC_CACHE.pop(next(iter(_CIRC_CACHE)))
        _CIRC_CACHE[key] = mat
    return mat


def circular_convolve_pv(kern, vals):
    """out[i] = (1/n) * sum_j kern[(i-j) mod n] * vals[j]; kern[0] must be 0
    so the diagonal term drops (principal value)."""
    kern = np.ascontiguousarray(kern, dtype=np.float64)
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    n = vals.shape[0]
    return _circulant(kern) @ vals / n


def segment_min_window(sv, cw, starts, ends, thresholds):
    """Per segment: minimal range sv[j]-sv[i] over windows [i, j] inside the
    segment whose weight sum exceeds the segment threshold strictly.

    sv must be sorted within each segment (segments nonempty); cw is the
    global inclusive cumsum of the matching weights. Segments with no qualifying window (possible
    only through rounding at thresholds close to the segment mass) return inf.
    """
    sv = np.asarray(sv, dtype=np.float64)
    cw = np.asarray(cw, dtype=np.float64)
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    thresholds = np.asarray(thresholds, dtype=np.float64)

    m = sv.shape[0]
    base = np.empty(m, dtype=np.float64)
    base[0] = 0.0
    base[1:] = cw[:-1]

    seg_of = np.zeros(m, dtype=np.int64)
    seg_of[starts[1:]] = 1
    seg_of = np.cumsum(seg_of)
    targets = base + thresholds[seg_of]
    j = np.searchsorted(cw, targets, side="right")
    valid = j < ends[seg_of]
    cand = np.where(valid, sv[np.minimum(j, m - 1)] - sv, np.inf)
    return np.minimum.reduceat(cand, starts)


def hull_restricted_osc(kern, vals, tvals, ball_lo, ball_hi, hull_lo, hull_hi):
    """Per ball: oscillation over its leaf range of
    tvals - (1/n) * kern-convolution of vals restricted to the hull range.

    Equivalently the convolution of vals zeroed outside the complement of
    the hull, evaluated on the ball only. kern[0] must be 0.
    """
    kern = np.ascontiguousarray(kern, dtype=np.float64)
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    tvals = np.ascontiguousarray(tvals, dtype=np.float64)
    n = vals.shape[0]
    out = np.empty(ball_lo.shape[0], dtype=np.float64)
    for k in range(ball_lo.shape[0]):
        rows = np.arange(ball_lo[k], ball_hi[k])
        cols = np.arange(hull_lo[k], hull_hi[k])
        block = kern[(rows[:, None] - cols[None, :]) % n]
        v = tvals[rows] - block @ vals[cols] / n
        out[k] = v.max() - v.min()
    return out
