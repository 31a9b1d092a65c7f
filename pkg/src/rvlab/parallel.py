"""Deterministic data-parallel map over fixed-size blocks.

Work is always cut into the same blocks regardless of the worker count and
results are merged in block order, so outputs do not depend on ``workers``.
"""

import contextlib
import os
from concurrent.futures import ThreadPoolExecutor

_workers = 1


def get_workers():
    return _workers


def set_workers(n):
    global _workers
    if n is None or n < 1:
        n = os.cpu_count() or 1
    _workers = int(n)


@contextlib.contextmanager
def workers(n):
    prev = _workers
    set_workers(n)
    try:
        yield
    finally:
        set_workers(prev)


def block_ranges(total, block):
    return [(lo, min(total, lo + block)) for lo in range(0, total, block)]


def map_blocks(fn, total, block):
    """Apply ``fn(lo, hi)`` to consecutive blocks and return results in order."""
    ranges = block_ranges(total, block)
    if _workers <= 1 or len(ranges) <= 1:
        return [fn(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=_workers) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))
