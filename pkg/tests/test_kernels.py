import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rvlab import _fallback, kernels, parallel
from rvlab.rng import Stream, derive_key

try:
    from rvlab import _kernels as compiled
except ImportError:  # pragma: no cover - build without the extension
    compiled = None

BACKENDS = [_fallback] + ([compiled] if compiled is not None else [])
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def test_backend_selected():
    assert kernels.BACKEND in ("compiled", "python")


@needs_compiled
@given(st.integers(0, 2**63), st.integers(0, 10**9), st.integers(0, 300))
def test_uniform_streams_bit_identical(key, start, count):
    a = compiled.uniform_fill(key, start, count)
    b = _fallback.uniform_fill(key, start, count)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
def test_uniform_range(backend):
    u = backend.uniform_fill(7, 0, 100_000)
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 4 * (1 / 12 / 1e5) ** 0.5


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
@given(reps=st.integers(1, 5), n=st.integers(1, 40), start=st.integers(0, 50),
       thr=st.lists(st.floats(0.0, 1.0), max_size=4))
def test_block_min_counts_oracle(backend, reps, n, start, thr):
    thr = np.sort(np.array(thr, dtype=float))
    key = derive_key(3, "kernel")
    mins, counts = backend.block_min_counts(key, start, reps, n, thr)
    u = _fallback.uniform_fill(key, start * n, reps * n).reshape(reps, n)
    assert np.array_equal(mins, u.min(axis=1))
    expect = (u[:, :, None] < thr[None, None, :]).sum(axis=1)
    assert np.array_equal(counts.reshape(reps, thr.size), expect)


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
def test_sliding_range_oracle(backend):
    rng = np.random.default_rng(0)
    V = rng.normal(size=(20, 33))
    for w in (0, 1, 4, 32, 40):
        got = backend.sliding_range(V, w)
        ww = min(w, V.shape[1] - 1)
        expect = np.array([
            max(np.ptp(row[i : i + ww + 1]) for i in range(V.shape[1] - ww)) for row in V
        ])
        assert np.allclose(got, expect)


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
def test_hill_log_sum_oracle(backend):
    top = np.sort(np.random.default_rng(1).pareto(1.0, 500) + 1)[::-1].copy()
    for k in (1, 10, 499):
        assert np.isclose(backend.hill_log_sum(top, k), np.sum(np.log(top[:k] / top[k])))


def test_block_split_invariance():
    s = Stream(5, "split")
    ref = kernels.block_min_counts(s.key, 0, 64, 100, np.array([0.01, 0.1]))
    parts = [kernels.block_min_counts(s.key, lo, 16, 100, np.array([0.01, 0.1])) for lo in range(0, 64, 16)]
    assert np.array_equal(ref[0], np.concatenate([p[0] for p in parts]))
    assert np.array_equal(ref[1], np.concatenate([p[1] for p in parts]))


@pytest.mark.parametrize("w", [1, 2, 8])
def test_stream_independent_of_workers(w):
    s = Stream(9, "workers")
    ref = s.uniform(0, 3 * 2**16 + 5)
    with parallel.workers(w):
        assert np.array_equal(s.uniform(0, 3 * 2**16 + 5), ref)
