"""Kernel backend selected at import.

The compiled extension is used when it was built; setting ``RVLAB_PURE=1``
forces the numpy fallback.  Both backends expose the same functions and
produce bit-identical uniform streams.
"""

import os

import numpy as np

from . import _fallback as python_backend

compiled_backend = None
if not os.environ.get("RVLAB_PURE"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend

BACKEND = backend.BACKEND
uniform_fill = backend.uniform_fill


def _buffer(a):
    # typed memoryviews need contiguous, writable float64 memory
    return np.require(a, dtype=np.float64, requirements=["C", "W"])


def block_min_counts(key, start_rep, reps, n, thresholds):
    """(min of n uniforms, cumulative counts below each threshold) per replicate."""
    thr = _buffer(thresholds)
    return backend.block_min_counts(key, start_rep, reps, n, thr)


def sliding_range(values, w):
    """Per row, max over windows of w + 1 consecutive nodes of (max - min)."""
    return backend.sliding_range(_buffer(values), int(w))


def hill_log_sum(top_desc, k):
    """sum_{i < k} log(top[i] / top[k]) for descending ``top``."""
    return backend.hill_log_sum(_buffer(top_desc), int(k))
