"""Pure numpy versions of the compiled kernels (same signatures, same draws)."""

import numpy as np

BACKEND = "python"

GAMMA = np.uint64(0x9E3779B97F4A7C15)
M1 = np.uint64(0xBF58476D1CE4E5B9)
M2 = np.uint64(0x94D049BB133111EB)
TWO_M53 = 1.0 / 9007199254740992.0
HALF_ULP = 0.5 / 9007199254740992.0

# replicates per chunk in block_min_counts; bounds peak memory
_CHUNK = 1 << 21


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * M1
    z = (z ^ (z >> np.uint64(27))) * M2
    return z ^ (z >> np.uint64(31))


def _uniform_counters(key, counters):
    z = _mix(np.uint64(key) + (counters + np.uint64(1)) * GAMMA)
    return (z >> np.uint64(11)).astype(np.float64) * TWO_M53 + HALF_ULP


def uniform_fill(key, start, count):
    counters = np.arange(start, start + count, dtype=np.uint64)
    return _uniform_counters(key, counters)


def block_min_counts(key, start_rep, reps, n, thresholds):
    thr = np.ascontiguousarray(thresholds, dtype=np.float64)
    m = thr.shape[0]
    mins = np.empty(reps, dtype=np.float64)
    counts = np.zeros((reps, m), dtype=np.int64)
    per = max(1, _CHUNK // max(n, 1))
    for r0 in range(0, reps, per):
        r1 = min(reps, r0 + per)
        first = (start_rep + r0) * n
        u = uniform_fill(key, first, (r1 - r0) * n).reshape(r1 - r0, n)
        mins[r0:r1] = u.min(axis=1)
        for c in range(m):
            counts[r0:r1, c] = np.count_nonzero(u < thr[c], axis=1)
    return mins, counts


def sliding_range(values, w):
    v = np.ascontiguousarray(values, dtype=np.float64)
    rows, g = v.shape
    if w <= 0:
        return np.zeros(rows)
    w = min(w, g - 1)
    windows = np.lib.stride_tricks.sliding_window_view(v, w + 1, axis=1)
    best = (windows.max(axis=2) - windows.min(axis=2)).max(axis=1)
    return np.asarray(best, dtype=np.float64)


def hill_log_sum(top_desc, k):
    top = np.asarray(top_desc, dtype=np.float64)
    return float(np.sum(np.log(top[:k] / top[k])))
