import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rvlab.core import Linear, Vector
from rvlab.errors import InsufficientData, InsufficientExceedances, ZeroModulus
from rvlab.estimators import (
    conditional_limit_test,
    default_threshold,
    empirical_marginal_part,
    empirical_spectral,
    empirical_tail_mass,
    estimate_tail_index,
    fit_log_correction,
    function_rv_diagnostic,
    hidden_rv_ladder,
    polar_decompose,
    polar_decompose_array,
    spectral_weights,
    tail_process_estimate,
)
from rvlab.moduli import AxisValue, CoordAbs, MaxAbsCoord, Norm, parse_modulus
from rvlab.samplers import (
    BrokenLine,
    DombryRibatet,
    Pareto,
    ParetoPairIID,
    SpikeFunction,
    StationaryMovingMax,
    sample_array,
    sample_values,
)


def hill_oracle(x, k):
    top = np.sort(x)[::-1][: k + 1]
    return k / np.sum(np.log(top[:k] / top[k]))


def test_hill_matches_oracle():
    x = sample_array(Pareto(2.0), 1, 20_000)[:, 0]
    for k in (10, 500, 5000):
        a, se = estimate_tail_index(x, k)
        assert a == pytest.approx(hill_oracle(x, k), rel=1e-12)
        assert se == pytest.approx(a / math.sqrt(k))


def test_hill_close_to_alpha():
    x = sample_array(Pareto(1.5), 2, 200_000)[:, 0]
    a, se = estimate_tail_index(x)
    assert abs(a - 1.5) < 4 * se


@given(st.integers(-20, 20), st.integers(0, 1000))
def test_hill_scale_invariant_powers_of_two(j, seed):
    x = sample_array(Pareto(1.0), seed, 300)[:, 0]
    assert estimate_tail_index(x * 2.0**j, 40) == estimate_tail_index(x, 40)


@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_hill_scale_invariant(c, seed):
    x = sample_array(Pareto(1.0), seed, 300)[:, 0]
    a, _ = estimate_tail_index(x * c, 40)
    assert a == pytest.approx(estimate_tail_index(x, 40)[0], rel=1e-9)


def test_hill_rejects_bad_input():
    with pytest.raises(InsufficientData):
        estimate_tail_index([1.0, 2.0], 5)
    with pytest.raises(InsufficientData):
        estimate_tail_index([3.0] * 10, 3)
    with pytest.raises(InsufficientData):
        estimate_tail_index([-1.0, 2.0, 3.0, 4.0], 2)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=2).filter(lambda v: max(map(abs, v)) > 1e-6))
def test_polar_round_trip(v):
    x = Vector(v)
    tau = Norm(2)
    p = polar_decompose(tau, Linear(), x)
    assert tau(p.direction) == pytest.approx(1.0)
    assert np.allclose(p.radius * p.direction.values, x.values, rtol=1e-12, atol=1e-12)


def test_polar_zero_modulus():
    with pytest.raises(ZeroModulus):
        polar_decompose(MaxAbsCoord(), Linear(), Vector([0.0, 0.0]))
    with pytest.raises(ZeroModulus):
        polar_decompose_array(MaxAbsCoord(), Linear(), np.zeros((2, 2)))


def test_spectral_weights_of_iid_pair():
    X = sample_array(ParetoPairIID(1.0), 5, 2_000_000)
    tau = MaxAbsCoord()
    assert default_threshold(tau.batch(X)) < 2000.0
    sp = empirical_spectral(X, tau, Linear(), 2000.0)
    w = spectral_weights(sp, {"axis1": lambda u: u.values[1] < 0.05, "axis2": lambda u: u.values[0] < 0.05})
    assert w["axis1"] == pytest.approx(0.5, abs=0.03)
    assert w["axis2"] == pytest.approx(0.5, abs=0.03)


def test_empirical_spectral_needs_exceedances():
    X = sample_array(ParetoPairIID(1.0), 5, 100)
    with pytest.raises(InsufficientExceedances):
        empirical_spectral(X, MaxAbsCoord(), Linear(), 1e9)


def test_empirical_tail_mass():
    X = sample_array(ParetoPairIID(1.0), 6, 500_000)
    m = empirical_tail_mass(X, lambda Y: Y[:, 0] > 1.0, 50.0, 50.0)
    assert m == pytest.approx(1.0, abs=0.07)


def test_ladder_iid_pair():
    X = sample_array(ParetoPairIID(1.0), 7, 1_000_000)
    ladder = [parse_modulus(s) for s in ("max_abs", "beta_min(0.25)", "min_abs")]
    out = hidden_rv_ladder(X, ladder)
    assert out[0].comment.startswith("reference")
    assert out[0].alpha_hat == pytest.approx(1.0, rel=0.05)
    assert out[1].comment.startswith("hidden") and out[2].comment.startswith("hidden")
    assert out[2].alpha_hat == pytest.approx(2.0, rel=0.07)


def test_ladder_flags_log_factor_at_one_half():
    n = 1_000_000
    X = sample_array(ParetoPairIID(1.0), 8, n)
    out = hidden_rv_ladder(X, [parse_modulus("max_abs"), parse_modulus("beta_min(0.5)")], k=int(n**0.8))
    assert out[1].log_corrected
    assert "log correction" in out[1].comment


def test_log_fit_on_pure_power():
    x = sample_array(Pareto(2.0), 9, 400_000)[:, 0]
    a, b, se_a, se_b = fit_log_correction(x, 2.0)
    assert abs(a - 2.0) < 4 * se_a
    assert abs(b) < 4 * se_b


def test_conditional_mismatch_dombry_ribatet():
    X = sample_array(DombryRibatet(1.0), 11, 2_000_000)
    res = conditional_limit_test(
        X, MaxAbsCoord(), AxisValue(1), [10.0, 30.0], {"ell>2": None, "ell>4": None}
    )
    assert res["index_mismatch"]
    for lv in res["levels"]:
        assert lv.implied_index["ell>4"] == pytest.approx(2.0, abs=6 * lv.stderr["ell>4"] / (0.0625 * math.log(4)))


def test_conditional_no_mismatch_iid_pair():
    X = sample_array(ParetoPairIID(1.0), 12, 500_000)
    res = conditional_limit_test(X, MaxAbsCoord(), CoordAbs(1), [20.0, 50.0], {"ell>2": None})
    assert not res["index_mismatch"]


def test_tail_process_moving_max():
    gen = StationaryMovingMax(length=32, weights=(1.0, 1.0), alpha=1.0)
    V = sample_values(gen, 13, 30_000)
    table = tail_process_estimate(V, [200.0], [0, 1], levels=(1.0,))
    by_lag = {row["lag"]: row for row in table}
    assert by_lag[0]["prob"] == 1.0
    target = gen.tail_process_exceedance(1, 1.0)
    assert abs(by_lag[1]["prob"] - target) < 4 * by_lag[1]["stderr"] + 0.02


def test_function_diag_broken_line_is_tight():
    V = sample_values(BrokenLine(alpha=1.0), 14, 100_000)
    res = function_rv_diagnostic(V, [[0.0, 1.0], [0.0, 0.5, 1.0]], [0.5, 0.1, 0.02], 0.5, [20.0, 100.0], lambda t: t)
    assert res["condition_ii"]
    for row in res["fidis"]:
        assert row["alpha_hat"] == pytest.approx(1.0, abs=5 * row["stderr"])


def test_function_diag_spike_is_not_tight():
    V = sample_values(SpikeFunction(alpha=1.0, width=0.005), 15, 100_000)
    res = function_rv_diagnostic(V, [[0.0, 1.0]], [0.5, 0.1, 0.02], 0.5, [20.0, 100.0], lambda t: t)
    assert not res["condition_ii"]


def test_empirical_marginal_part():
    X = sample_array(ParetoPairIID(1.0), 16, 1_000_000)
    part = empirical_marginal_part(X, 0, 100.0, 1.0)
    assert part.box_mass(np.array([1.0, -np.inf]), np.array([np.inf, np.inf])) == pytest.approx(1.0, abs=0.15)
    with pytest.raises(InsufficientExceedances):
        empirical_marginal_part(X, 0, 1e7, 1.0)
