import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rvlab.core import Linear, Polytope, SetLinear, Vector
from rvlab.errors import DimensionMismatch, InvalidInterval, NonMorphism, TrivialPushforward, TrivialResult
from rvlab.moduli import CoordAbs, MaxAbsCoord, Norm, PositiveLinear, Scaled, SetSup
from rvlab.samplers import ParetoPairIID, SpectralRV, sample_array
from rvlab.tailmeasure import (
    RaySegments,
    SpectralMeasure,
    TailMeasure,
    as_ray_segments,
    assemble_from_marginals,
    change_modulus,
    pushforward,
    sector_mass,
    theta_tail,
)

ALL = lambda u: True  # noqa: E731


def axis_measure(alpha=1.0, w=(1.0, 1.0)):
    atoms = [(Vector([1.0, 0.0]), w[0]), (Vector([0.0, 1.0]), w[1])]
    return TailMeasure(alpha, SpectralMeasure(atoms, MaxAbsCoord()))


def test_theta_tail():
    assert theta_tail(2, 1) == 1
    assert theta_tail(1, 10) == 0.1
    assert theta_tail(0.5, 4) == 0.5
    with pytest.raises(ValueError):
        theta_tail(1, 0)
    with pytest.raises(ValueError):
        theta_tail(0, 1)


def test_sector_mass_examples():
    one = TailMeasure(1.0, SpectralMeasure([(Vector([1.0]), 1.0)], Norm(2)))
    assert sector_mass(one, ALL, 1) == 1
    two = TailMeasure(2.0, SpectralMeasure([(Vector([1.0, 0]), 0.3), (Vector([0, 1.0]), 0.7)], Norm(2)))
    assert math.isclose(sector_mass(two, ALL, 2, 4), 0.1875, rel_tol=1e-15)
    assert sector_mass(two, lambda u: False, 2, 4) == 0
    with pytest.raises(InvalidInterval):
        sector_mass(two, ALL, 4, 2)


@given(st.floats(0.1, 5), st.floats(0.1, 10), st.floats(1.01, 10), st.floats(0.01, 100))
def test_sector_mass_homogeneity(alpha, s, ratio, c):
    mu = axis_measure(alpha, (0.4, 1.7))
    t = s * ratio
    lhs = sector_mass(mu, ALL, c * s, c * t)
    rhs = c ** (-alpha) * sector_mass(mu, ALL, s, t)
    assert math.isclose(lhs, rhs, rel_tol=1e-12)


def test_spectral_validation_and_merge():
    with pytest.raises(ValueError):
        SpectralMeasure([(Vector([2.0, 0.0]), 1.0)], MaxAbsCoord())
    with pytest.raises(ValueError):
        SpectralMeasure([(Vector([1.0, 0.0]), 0.0)], MaxAbsCoord())
    sm = SpectralMeasure([(Vector([1.0, 0.0]), 0.5), (Vector([1.0, 1e-12]), 0.25)], MaxAbsCoord())
    assert len(sm) == 1 and sm.total == 0.75


def test_json_round_trip():
    mu = axis_measure(1.5, (0.3, 0.7))
    nu = TailMeasure.from_json(mu.to_json())
    assert nu.alpha == 1.5 and nu.spectral.atoms == mu.spectral.atoms


def test_pushforward_examples():
    half = TailMeasure(1.0, SpectralMeasure([(Vector([1.0]), 0.5)], Norm(2)))
    img = pushforward(half, lambda x: Vector([x.values[0], 0.0]), MaxAbsCoord())
    assert img.spectral.atoms == [(Vector([1.0, 0.0]), 0.5)]
    mu = axis_measure()
    same = pushforward(mu, lambda x: x, MaxAbsCoord())
    assert same.spectral.atoms == mu.spectral.atoms
    one = TailMeasure(1.0, SpectralMeasure([(Vector([1.0]), 1.0)], Norm(2)))
    seg = pushforward(one, lambda y: Polytope([[0.0, 0.0], [y.values[0], 0.0]]), SetSup(), SetLinear())
    (loc, w), = seg.spectral.atoms
    assert w == 1.0 and np.allclose(sorted(loc.vertices[:, 0]), [0.0, 1.0])


def test_pushforward_errors():
    mu = axis_measure()
    with pytest.raises(TrivialPushforward):
        pushforward(mu, lambda x: Vector([0.0, 0.0]), MaxAbsCoord())
    with pytest.raises(NonMorphism):
        pushforward(mu, lambda x: Vector(x.values**2), MaxAbsCoord())


@given(st.floats(0.5, 3), st.floats(-3, 3), st.floats(0.2, 3))
def test_pushforward_linear_round_trip(alpha, shear, s):
    mu = axis_measure(alpha, (0.6, 1.3))
    A = np.array([[1.0, shear], [0.0, 2.0]])
    f = lambda x: Vector(A @ x.values)  # noqa: E731
    img = pushforward(mu, f, Norm(2))
    # mu({x: ||A x|| > s}) computed on the preimage side
    pre = sum(w * (np.linalg.norm(A @ u.values) / s) ** alpha for u, w in mu.spectral.atoms)
    assert math.isclose(sector_mass(img, ALL, s), pre, rel_tol=1e-10)


def test_change_modulus_examples():
    mu = axis_measure()
    same = change_modulus(mu, MaxAbsCoord())
    assert same.spectral.atoms == mu.spectral.atoms
    e1 = change_modulus(mu, CoordAbs(1))
    assert e1.spectral.atoms == [(Vector([1.0, 0.0]), 1.0)]
    two = change_modulus(axis_measure(1.5), Scaled(2.0, MaxAbsCoord()))
    for u, w in two.spectral.atoms:
        assert math.isclose(w, 2**1.5) and math.isclose(u.values.max(), 0.5)
    with pytest.raises(TrivialResult):
        change_modulus(TailMeasure(1.0, SpectralMeasure([(Vector([0.0, 1.0]), 1.0)], MaxAbsCoord())), CoordAbs(1))


@given(st.lists(st.tuples(st.floats(0.05, 1), st.floats(0.05, 1), st.floats(0.1, 3)), min_size=1, max_size=4),
       st.tuples(st.floats(0.01, 5), st.floats(0.01, 5)), st.floats(0.3, 3))
def test_change_modulus_identity(atoms, weights, alpha):
    locs = [np.array([a, b]) / max(a, b) for a, b, _ in atoms]
    mu = TailMeasure(alpha, SpectralMeasure([(Vector(u), w) for u, (_, _, w) in zip(locs, atoms)], MaxAbsCoord()))
    ell = PositiveLinear(weights)
    nu = change_modulus(mu, ell)
    expect = sum(w * ell(u) ** alpha for u, w in mu.spectral.atoms)
    assert math.isclose(sector_mass(nu, ALL, 1.0), expect, rel_tol=1e-12)


def test_change_modulus_against_conditioning():
    mu = axis_measure()
    nu = change_modulus(mu, CoordAbs(1))
    X = sample_array(ParetoPairIID(1.0), 8, 10**6)
    t = 1000.0
    est = t * np.mean(X[:, 0] > t)
    se = t * math.sqrt(1e-3 / 1e6)
    assert abs(est - sector_mass(nu, ALL, 1.0)) < 4 * se


def test_assembly_single_and_exchangeable():
    part = axis_measure()
    one = TailMeasure(1.0, SpectralMeasure([(Vector([1.0]), 2.0)], Norm(2)))
    seg = assemble_from_marginals([one], 2.0)
    assert math.isclose(seg.total, 1.0)
    parts = [
        TailMeasure(1.0, SpectralMeasure([(Vector([1.0, 0.0]), 1.0)], CoordAbs(1))),
        TailMeasure(1.0, SpectralMeasure([(Vector([0.0, 1.0]), 1.0)], CoordAbs(2))),
    ]
    seg = assemble_from_marginals(parts, 1.0)
    full = as_ray_segments(part)
    for lo, hi in [([1, -1], [np.inf, 1]), ([-1, 1], [0.5, 3]), ([2, -1], [5, 1]), ([1, 1], [np.inf, np.inf])]:
        assert math.isclose(seg.box_mass(lo, hi), full.box_mass(lo, hi), abs_tol=1e-15)
    with pytest.raises(DimensionMismatch):
        assemble_from_marginals([one, parts[0]], 1.0)


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.1, 2)), min_size=1, max_size=5),
       st.floats(0.2, 3), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 3), st.floats(0.1, 3))
def test_assembly_permutation_invariance(atoms, a, lo0, lo1, w0, w1):
    U = np.array([[x, y] for x, y, _ in atoms])
    keep = np.abs(U).max(axis=1) > 1e-3
    if not keep.any():
        return
    U = U[keep] / np.abs(U[keep]).max(axis=1, keepdims=True)
    w = np.array([c for _, _, c in atoms])[keep]
    k = len(w)
    rays = RaySegments(1.0, U, w, np.zeros(k), np.full(k, np.inf))
    parts = [rays, rays]
    lo, hi = [lo0, lo1], [lo0 + w0, lo1 + w1]
    direct = assemble_from_marginals(parts, a).box_mass(lo, hi)
    flipped = assemble_from_marginals([p.permuted([1, 0]) for p in parts], a, order=[1, 0])
    assert math.isclose(direct, flipped.box_mass(lo[::-1], hi[::-1]), rel_tol=1e-12, abs_tol=1e-15)
    # when every part is the full measure, any order gives mu restricted to {max > a}
    other = assemble_from_marginals(parts, a, order=[1, 0]).box_mass(lo, hi)
    assert math.isclose(direct, other, rel_tol=1e-12, abs_tol=1e-15)


def test_spectral_rv_tail():
    mu = axis_measure(1.5, (0.3, 0.7))
    X = sample_array(SpectralRV(mu), 2, 10**5)
    assert np.all((X[:, 0] == 0) | (X[:, 1] == 0))
    assert abs(np.mean(X[:, 0] > 0) - 0.3) < 4 * math.sqrt(0.21 / 1e5)
