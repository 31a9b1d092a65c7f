import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rvlab.core import Polytope
from rvlab.errors import BadNormingRule, BadParameters, DegeneratePolytope, MomentDiagnosticFailed
from rvlab.limits import (
    MdaSpec,
    breiman_verify,
    janossy_rv_check,
    mda_check,
    mda_rate_check,
    norming_constant,
    poisson_limit_counts,
    replicate_min_counts,
    set_functional_pipeline,
    set_functional_values,
    void_probability_check,
)
from rvlab.rng import Stream
from rvlab.samplers import (
    BinomialPP,
    ConstantLaw,
    EtaFamily,
    LLNSum,
    LogPareto,
    Pareto,
    PoissonPP,
    WeibullTail,
)


def test_replicate_min_counts_oracle():
    s = Stream(3, "t")
    thr = np.array([0.01, 0.2])
    mins, cum = replicate_min_counts(s, 50, 40, thr)
    U = s.uniform(0, 50 * 40).reshape(50, 40)
    assert np.array_equal(mins, U.min(axis=1))
    assert np.array_equal(cum[:, 0], (U < 0.01).sum(axis=1))
    assert np.array_equal(cum[:, 1], (U < 0.2).sum(axis=1))


@pytest.mark.parametrize(
    "gen, spec",
    [
        (Pareto(1.0), MdaSpec("frechet", 1.0)),
        (WeibullTail(1.0, endpoint=2.0), MdaSpec("weibull", 1.0, endpoint=2.0)),
        (LogPareto(1.0), MdaSpec("gumbel", 1.0)),
    ],
)
def test_mda_small(gen, spec):
    rows = mda_check(gen, spec, [1000], 20_000, seed=5)
    assert len(rows) == 3
    assert all(r.passed for r in rows), [r.to_json() for r in rows]


def test_frechet_target_value():
    assert float(MdaSpec("frechet").target_cdf(1.0)) == pytest.approx(math.exp(-1.0))
    assert float(MdaSpec("weibull", endpoint=2.0).target_cdf(1.0)) == pytest.approx(math.exp(-1.0))
    assert float(MdaSpec("gumbel").target_cdf(0.0)) == pytest.approx(math.exp(-1.0))


def test_closed_norming_is_n_for_pareto():
    assert norming_constant(Pareto(1.0), MdaSpec("frechet"), 10_000) == pytest.approx(10_000)
    a = norming_constant(Pareto(1.0), MdaSpec("frechet", norming="empirical"), 100, seed=1)
    assert a == pytest.approx(100, rel=0.05)


def test_bad_norming_rule():
    with pytest.raises(BadNormingRule):
        MdaSpec("frechet", norming="guess")
    with pytest.raises(BadParameters):
        MdaSpec("cauchy")


def test_mda_rate():
    out = mda_rate_check(Pareto(1.0), MdaSpec("frechet"), 500, [2000, 8000], seed=2)
    assert all(r["pass"] for r in out)
    assert out[1]["bound"] < out[0]["bound"]


def test_void_probabilities():
    rows = void_probability_check(Pareto(1.0), [0.5, 1.0, 2.0], [1000], 20_000, seed=3)
    assert all(r.passed for r in rows)
    far = void_probability_check(Pareto(1.0), [1e6], [10], 2000, seed=3)
    assert far[0].estimate == pytest.approx(1.0, abs=1e-3)


def test_poisson_counts():
    res = poisson_limit_counts(Pareto(1.0), [(1.0, math.inf)], 1000, 20_000, seed=4, tv_tol=0.02)
    s = res["sets"][0]
    assert s["empirical"][0] == pytest.approx(math.exp(-1.0), abs=0.015)
    assert s["pass"]


def test_poisson_counts_disjoint_sets_uncorrelated():
    res = poisson_limit_counts(Pareto(1.0), [(0.5, 1.0), (1.0, math.inf)], 1000, 20_000, seed=6, tv_tol=0.02)
    cov = np.array(res["covariance"])
    se = math.sqrt(cov[0, 0] * cov[1, 1] / 20_000)
    assert abs(cov[0, 1]) < 5 * se
    assert all(s["pass"] for s in res["sets"])


def test_poisson_counts_n_one():
    res = poisson_limit_counts(Pareto(1.0), [(2.0, math.inf)], 1, 5000, seed=7, tv_tol=1.0)
    emp = np.array(res["sets"][0]["empirical"])
    assert emp[0] + emp[1] == pytest.approx(1.0)
    assert np.all(emp[2:] == 0.0)


def test_breiman_constant_one():
    rep = breiman_verify(Pareto(1.0), ConstantLaw(("const", 1.0)), [20.0, 50.0], seed=8, n=200_000,
                         w_samples=1000)
    assert rep["target_constant"] == 1.0
    assert all(lv["constant"].passed for lv in rep["levels"])


def test_breiman_uniform():
    rep = breiman_verify(Pareto(1.0), ConstantLaw(("uniform", 1.0, 2.0)), [20.0, 50.0], seed=9, n=1_000_000,
                         w_samples=200_000)
    assert rep["target_constant"] == pytest.approx(1.5, abs=0.01)
    assert all(lv["constant"].passed for lv in rep["levels"])


@settings(max_examples=10)
@given(st.floats(0.5, 4.0), st.sampled_from([1.0, 2.0]))
def test_breiman_target_scales(c, alpha):
    kw = dict(seed=10, n=2000, w_samples=20_000, moment_samples=100, t_ladder=[2.0])
    base = breiman_verify(Pareto(alpha), ConstantLaw(("uniform", 1.0, 2.0)), **kw)
    scaled = breiman_verify(Pareto(alpha), ConstantLaw(("uniform", 1.0, 2.0)), scale=c, **kw)
    assert scaled["target_constant"] == pytest.approx(c**alpha * base["target_constant"], rel=1e-12)


def test_breiman_lln_constant():
    rep = breiman_verify(Pareto(1.0), LLNSum(mean=2.0), [50.0, 200.0], seed=11, n=1_000_000, w_samples=100)
    assert rep["target_constant"] == 2.0
    assert rep["moments"]["pass"]
    assert all(lv["constant"].passed for lv in rep["levels"])


class _Exploding(EtaFamily):
    name = "exploding"

    def draw(self, stream, x):
        return np.sqrt(np.asarray(x, dtype=float)) * (1.0 + stream.uniform(0, len(x)))

    def limit(self, stream, n):
        return np.ones(n)


def test_breiman_moment_warning():
    with pytest.warns(MomentDiagnosticFailed):
        rep = breiman_verify(Pareto(1.0), _Exploding(), [10.0], seed=12, n=5000, w_samples=100,
                             moment_samples=100)
    assert not rep["moments"]["pass"]


def test_janossy_single_point_has_no_two_point_term():
    rep = janossy_rv_check(BinomialPP(1, Pareto(1.0)), 1.0, [1.0, 2.0], [10.0, 100.0], lambda t: t, seed=13,
                           n=100_000)
    assert all(lv["two_point"] == 0.0 for lv in rep["levels"])
    assert rep["two_point_decays"]


def test_janossy_binomial_multiplicity():
    rep = janossy_rv_check(BinomialPP(3, Pareto(1.0)), 1.0, [1.0, 2.0], [100.0, 1000.0], lambda t: t, seed=14,
                           n=1_000_000)
    assert rep["limit_multiplicity"] == 3
    assert all(v.passed for lv in rep["levels"] for v in lv["probes"])
    assert rep["two_point_decays"]


def test_janossy_poisson():
    rep = janossy_rv_check(PoissonPP(2.0, Pareto(1.0)), 1.0, [1.0, 3.0], [100.0, 1000.0], lambda t: t, seed=15,
                           n=1_000_000)
    assert all(v.passed for lv in rep["levels"] for v in lv["probes"])


def test_janossy_skips_empty_levels():
    rep = janossy_rv_check(BinomialPP(1, Pareto(1.0)), 1.0, [1.0], [1e12], lambda t: t, seed=16, n=1000)
    assert rep["skipped"] == [1e12]


def test_segment_steiner_is_midpoint():
    x = np.array([3.0, -1.0])
    vals = set_functional_values([Polytope(np.array([[0.0, 0.0], x]))], ["steiner"])
    assert np.allclose(vals["steiner_point"][0], x / 2, atol=1e-9)


def test_inscribed_radius_needs_interior():
    with pytest.raises(DegeneratePolytope):
        set_functional_values([Polytope(np.array([[0.0, 0.0], [1.0, 1.0]]))], ["inscribed_radius"])
    sq = Polytope(np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]))
    assert set_functional_values([sq], ["inscribed_radius"])["inscribed_radius"][0] == pytest.approx(1.0)


def test_pipeline_on_scaled_squares():
    rng = np.random.default_rng(0)
    r = stats.pareto.rvs(1.0, size=3000, random_state=rng)
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    sets = [Polytope(s * sq) for s in r]
    report, vals = set_functional_pipeline(sets, k=300)
    assert report["steiner_containment"]["pass"]
    for f in ("set_sup", "steiner", "mean_width", "volume_root"):
        assert report[f]["alpha_hat"] == pytest.approx(1.0, abs=5 * report[f]["stderr"])


def test_unknown_functional():
    with pytest.raises(BadParameters):
        set_functional_values([], ["diameter"])
