import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rvlab.core import (
    AffineInverse,
    ComponentSubset,
    FunctionValues,
    GridFunction,
    InverseLinear,
    Linear,
    LogShift,
    MinShift,
    PointConfig,
    Polytope,
    PowerWeights,
    Sequence,
    SetLinear,
    Uplifted,
    Vector,
    apply_scaling,
    apply_scaling_array,
    element_distance,
    element_from_json,
    invert_scaling,
    scaling_from_name,
)
from rvlab.errors import IncompatibleVariant, InvalidElement, NonpositiveScale
from rvlab.grammar import parse, unparse

scales = st.floats(0.05, 20.0)
coords = st.lists(st.floats(-50, 50), min_size=2, max_size=2)
pos_coords = st.lists(st.floats(0.01, 50), min_size=2, max_size=2)

VECTOR_SCALINGS = [
    Linear(),
    PowerWeights((1.0, 0.5)),
    InverseLinear(),
    ComponentSubset((1,)),
    LogShift(),
    AffineInverse(3.0),
]


def close(x, y, rtol=1e-9):
    a, b = np.asarray(x.values), np.asarray(y.values)
    return np.allclose(a, b, rtol=rtol, atol=1e-9 * (1 + np.abs(a).max()))


@pytest.mark.parametrize("s", VECTOR_SCALINGS, ids=lambda s: s.describe())
@given(t=scales, u=scales, x=coords)
def test_group_law(s, t, u, x):
    v = Vector(x)
    assert close(apply_scaling(s, t, apply_scaling(s, u, v)), apply_scaling(s, t * u, v))
    assert apply_scaling(s, 1.0, v) == v
    assert close(invert_scaling(s, t, apply_scaling(s, t, v)), v)


@given(t=scales, u=scales, x=pos_coords)
def test_min_shift_group_law(t, u, x):
    s = MinShift()
    v = Vector(x)
    assert close(apply_scaling(s, t, apply_scaling(s, u, v)), apply_scaling(s, t * u, v))


@given(t=scales, u=scales)
def test_function_and_set_scalings(t, u):
    f = GridFunction(np.sin(np.linspace(0, 3, 17)))
    s = FunctionValues()
    assert close(apply_scaling(s, t, apply_scaling(s, u, f)), apply_scaling(s, t * u, f))
    K = Polytope([[0, 0], [1, 0], [0, 2]])
    a = apply_scaling(SetLinear(), t, apply_scaling(SetLinear(), u, K)).vertices
    b = apply_scaling(SetLinear(), t * u, K).vertices
    assert np.allclose(a, b)
    P = PointConfig([[1.0, 2.0], [3.0, 4.0]])
    up = Uplifted(Linear())
    assert np.allclose(apply_scaling(up, t, P).points, t * P.points)


def test_examples():
    assert apply_scaling(Linear(), 2, Vector([1, 2])) == Vector([2, 4])
    assert apply_scaling(PowerWeights((1, 0.5)), 4, Vector([1, 1])) == Vector([4, 2])
    assert apply_scaling(ComponentSubset((1,)), 3, Vector([1, 1])) == Vector([3, 1])
    assert np.allclose(apply_scaling(LogShift(), math.e, Vector([0.0])).values, [1.0])


def test_errors():
    with pytest.raises(NonpositiveScale):
        apply_scaling(Linear(), 0.0, Vector([1]))
    with pytest.raises(NonpositiveScale):
        apply_scaling(Linear(), -1.0, Vector([1]))
    with pytest.raises(IncompatibleVariant):
        apply_scaling(FunctionValues(), 2.0, Vector([1]))
    with pytest.raises(InvalidElement):
        Vector([1.0, float("nan")])
    with pytest.raises(NonpositiveScale):
        apply_scaling_array(Linear(), np.array([1.0, 0.0]), np.ones((2, 2)))


def test_empty_point_config_fixed():
    P = PointConfig([], dim=2)
    assert apply_scaling(Uplifted(Linear()), 5.0, P).total == 0


@pytest.mark.parametrize(
    "x",
    [
        Vector([1.0, -2.0]),
        Sequence([1.0, 0.5, 0.25]),
        GridFunction([0.0, 1.0, 0.0], 0, 2),
        PointConfig([[1.0], [2.0]], [1, 2]),
        Polytope([[0, 0], [2, 0], [0, 1]]),
    ],
)
def test_json_round_trip(x):
    y = element_from_json(x.to_json())
    assert y == x
    assert element_distance(x, y) == 0.0


def test_sequence_distance_pads():
    assert element_distance(Sequence([1, 2]), Sequence([1, 2, 0.5])) == 0.5


@given(st.sampled_from(["linear", "log_shift", "min_shift", "power_weights(1, 0.5)", "affine_inverse(2)",
                        "component_subset(1, 2)"]))
def test_scaling_grammar_round_trip(text):
    name, args = parse(text)
    s = scaling_from_name(name, args)
    assert parse(s.describe()) == parse(text)


@given(st.recursive(
    st.tuples(st.sampled_from(["a", "max_of", "norm"]), st.just([])),
    lambda inner: st.tuples(st.sampled_from(["f", "g"]), st.lists(
        st.one_of(inner, st.integers(-5, 5).map(float)), max_size=3)),
    max_leaves=6,
))
def test_grammar_round_trip(tree):
    assert parse(unparse(tree)) == tree
