import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from rvlab.rng import Stream, derive_key


@given(st.integers(0, 2**40), st.integers(0, 1000), st.integers(1, 200), st.integers(0, 200))
def test_prefix_and_offset_stability(seed, start, count, extra):
    s = Stream(seed, "x")
    a = s.uniform(start, count + extra)
    assert np.array_equal(a[:count], s.uniform(start, count))
    assert np.array_equal(a[extra:], s.uniform(start + extra, count))


def test_children_differ():
    s = Stream(1)
    assert derive_key(1, "a") != derive_key(1, "b")
    assert derive_key(1, "a") != derive_key(2, "a")
    assert not np.array_equal(s.child("a").uniform(0, 10), s.child("b").uniform(0, 10))


def test_distributions_ks():
    s = Stream(2024, "dist")
    n = 20000
    assert stats.kstest(s.uniform(0, n), "uniform").pvalue > 1e-4
    assert stats.kstest(s.normal(0, n), "norm").pvalue > 1e-4
    assert stats.kstest(s.exponential(0, n), "expon").pvalue > 1e-4
    assert stats.kstest(s.pareto(1.5, 0, n), stats.pareto(1.5).cdf).pvalue > 1e-4
    g = s.gamma(np.full(n, 2.5), 0)
    assert stats.kstest(g, stats.gamma(2.5).cdf).pvalue > 1e-4
    g = s.child("small").gamma(np.full(n, 0.4), 0)
    assert stats.kstest(g, stats.gamma(0.4).cdf).pvalue > 1e-4


def test_poisson_and_categorical():
    s = Stream(3)
    p = s.poisson(np.full(50000, 1.3), 0)
    assert abs(p.mean() - 1.3) < 4 * np.sqrt(1.3 / 50000)
    c = s.categorical([0.2, 0.8], 0, 50000)
    assert abs(np.mean(c == 1) - 0.8) < 4 * np.sqrt(0.16 / 50000)


def test_gamma_prefix_stable():
    s = Stream(4)
    a = s.gamma(np.array([0.5, 2.0, 7.0, 0.0]), 10)
    b = s.gamma(np.array([0.5, 2.0]), 10)
    assert np.array_equal(a[:2], b)
    assert a[3] == 0.0
