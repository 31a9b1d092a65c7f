"""Carrier spaces and scalings.

Elements are immutable wrappers around numpy arrays.  A scaling is a
descriptor of a group action ``T_t`` (``T_t T_s = T_ts``, ``T_1 = id``) on one
or more element kinds; :func:`apply_scaling` evaluates it and
:func:`invert_scaling` evaluates ``T_{1/t}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence as Seq

import numpy as np

from .errors import IncompatibleVariant, InvalidElement, NonpositiveScale

DEFAULT_GRID = 257


def _frozen(values, ndim=1, name="values"):
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise InvalidElement(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidElement(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


class Element:
    """Base class of carrier-space points."""

    kind = "element"

    def to_json(self):
        return {"kind": self.kind, "payload": self._payload()}

    def _payload(self):
        raise NotImplementedError

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.to_json() == other.to_json()

    def __hash__(self):
        return hash(repr(self.to_json()))


class Vector(Element):
    kind = "vector"

    def __init__(self, values):
        self.values = _frozen(np.atleast_1d(values))

    @property
    def dim(self):
        return self.values.shape[0]

    def _payload(self):
        return {"values": self.values.tolist()}

    def __repr__(self):
        return f"Vector({self.values.tolist()})"


class Sequence(Element):
    """Truncated sequence; coordinates past ``truncation`` are zero."""

    kind = "sequence"

    def __init__(self, values):
        self.values = _frozen(np.atleast_1d(values))

    @property
    def truncation(self):
        return self.values.shape[0]

    def padded(self, m):
        if m <= self.truncation:
            return self.values[:m]
        return np.concatenate([self.values, np.zeros(m - self.truncation)])

    def _payload(self):
        return {"values": self.values.tolist()}

    def __repr__(self):
        return f"Sequence({self.values.tolist()})"


class GridFunction(Element):
    """Continuous function on [a, b], linear between uniform grid nodes."""

    kind = "grid_function"

    def __init__(self, values, a=0.0, b=1.0):
        self.values = _frozen(values)
        if self.values.shape[0] < 2:
            raise InvalidElement("grid function needs at least 2 nodes")
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise InvalidElement("domain must be a finite interval a < b")
        self.a = float(a)
        self.b = float(b)

    @property
    def grid(self):
        return np.linspace(self.a, self.b, self.values.shape[0])

    @property
    def step(self):
        return (self.b - self.a) / (self.values.shape[0] - 1)

    def __call__(self, u):
        return np.interp(u, self.grid, self.values)

    def _payload(self):
        return {"a": self.a, "b": self.b, "values": self.values.tolist()}

    def __repr__(self):
        return f"GridFunction(g={self.values.shape[0]}, [{self.a}, {self.b}])"


class PointConfig(Element):
    """Finite counting measure: support points with multiplicities (and optional marks)."""

    kind = "point_config"

    def __init__(self, points, multiplicities=None, marks=None, dim=None):
        pts = np.array(points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, dim if dim is not None else 1)
        elif pts.ndim == 1:
            pts = pts.reshape(-1, 1) if dim in (None, 1) else pts.reshape(-1, dim)
        self.points = _frozen(pts, ndim=2, name="points")
        k = self.points.shape[0]
        if multiplicities is None:
            mult = np.ones(k, dtype=np.int64)
        else:
            mult = np.array(multiplicities, dtype=np.int64)
        if mult.shape != (k,) or np.any(mult < 1):
            raise InvalidElement("multiplicities must be positive integers, one per point")
        mult.setflags(write=False)
        self.multiplicities = mult
        self.marks = None if marks is None else _frozen(marks, name="marks")
        if self.marks is not None and self.marks.shape != (k,):
            raise InvalidElement("one mark per support point")

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def total(self):
        return int(self.multiplicities.sum())

    def expanded(self):
        """Points repeated by multiplicity."""
        return np.repeat(self.points, self.multiplicities, axis=0)

    def _payload(self):
        out = {
            "points": self.points.tolist(),
            "multiplicities": self.multiplicities.tolist(),
        }
        if self.marks is not None:
            out["marks"] = self.marks.tolist()
        return out

    def __repr__(self):
        items = ", ".join(
            f"{tuple(p)}x{m}" for p, m in zip(self.points.tolist(), self.multiplicities.tolist())
        )
        return f"PointConfig({{{items}}})"


def convex_hull_2d(points):
    """Vertices of the planar convex hull in counter-clockwise order (monotone chain)."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


class Polytope(Element):
    """Convex hull of finitely many points; only the hull vertices are kept."""

    kind = "polytope"

    def __init__(self, vertices, hull=True):
        v = np.array(vertices, dtype=float)
        if v.ndim == 1:
            v = v.reshape(1, -1)
        v = _frozen(v, ndim=2, name="vertices")
        if v.shape[0] < 1:
            raise InvalidElement("polytope needs at least one vertex")
        if hull:
            if v.shape[1] == 2:
                v = convex_hull_2d(v)
            elif v.shape[1] == 1:
                v = np.array([[v.min()], [v.max()]]) if v.min() < v.max() else v[:1]
            elif v.shape[0] > v.shape[1] + 1:
                from scipy.spatial import ConvexHull, QhullError

                try:
                    v = v[ConvexHull(v).vertices]
                except QhullError:
                    pass
        v = np.array(v, dtype=float)
        v.setflags(write=False)
        self.vertices = v

    @property
    def dim(self):
        return self.vertices.shape[1]

    def _payload(self):
        return {"vertices": self.vertices.tolist()}

    def __repr__(self):
        return f"Polytope({self.vertices.tolist()})"


_KINDS = {
    "vector": lambda p: Vector(p["values"]),
    "sequence": lambda p: Sequence(p["values"]),
    "grid_function": lambda p: GridFunction(p["values"], p.get("a", 0.0), p.get("b", 1.0)),
    "point_config": lambda p: PointConfig(
        p["points"], p.get("multiplicities"), p.get("marks"), dim=p.get("dim")
    ),
    "polytope": lambda p: Polytope(p["vertices"]),
}


def element_from_json(obj):
    try:
        build = _KINDS[obj["kind"]]
    except KeyError as exc:
        raise InvalidElement(f"unknown element kind {obj.get('kind')!r}") from exc
    return build(obj["payload"])


def element_array(x):
    """Flat coordinate array of an element, for distances."""
    if isinstance(x, (Vector, Sequence, GridFunction)):
        return x.values
    if isinstance(x, PointConfig):
        return np.concatenate([x.expanded().ravel(), [] if x.marks is None else x.marks])
    if isinstance(x, Polytope):
        return x.vertices[np.lexsort(x.vertices.T[::-1])].ravel()
    raise IncompatibleVariant(f"no coordinates for {type(x).__name__}")


def element_distance(x, y):
    """Sup-distance between coordinate arrays of two elements of the same kind and shape."""
    if type(x) is not type(y):
        return math.inf
    if isinstance(x, Sequence):
        m = max(x.truncation, y.truncation)
        return float(np.max(np.abs(x.padded(m) - y.padded(m)), initial=0.0))
    a, b = element_array(x), element_array(y)
    if a.shape != b.shape:
        return math.inf
    return float(np.max(np.abs(a - b), initial=0.0))


# ---------------------------------------------------------------------------
# scalings


class ScalingSpec:
    """A group action of the multiplicative group on some element kinds."""

    name = "scaling"
    acts_on: tuple = ()

    def act(self, t, x):
        raise NotImplementedError

    def act_array(self, t, X):
        """Act on rows of an (n, d) array of vectors; ``t`` scalar or shape (n,)."""
        raise IncompatibleVariant(f"{self.name} has no array form")

    def describe(self):
        return self.name

    def __repr__(self):
        return self.describe()

    def __eq__(self, other):
        return type(other) is type(self) and self.describe() == other.describe()

    def __hash__(self):
        return hash(self.describe())


def _col(t, X):
    t = np.asarray(t, dtype=float)
    return t[:, None] if t.ndim == 1 else t


class Linear(ScalingSpec):
    name = "linear"
    acts_on = (Vector, Sequence, GridFunction)

    def act(self, t, x):
        if isinstance(x, GridFunction):
            return GridFunction(t * x.values, x.a, x.b)
        return type(x)(t * x.values)

    def act_array(self, t, X):
        return _col(t, X) * X


@dataclass(frozen=True, eq=False, repr=False)
class PowerWeights(ScalingSpec):
    """T_t x = (t**a_1 x_1, ..., t**a_d x_d)."""

    exponents: tuple
    name = "power_weights"
    acts_on = (Vector,)

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(float(a) for a in self.exponents))

    def act(self, t, x):
        a = np.array(self.exponents)
        if x.dim != a.size:
            raise IncompatibleVariant(f"power weights of length {a.size} on a {x.dim}-vector")
        return Vector(np.power(t, a) * x.values)

    def act_array(self, t, X):
        return np.power(_col(t, X), np.array(self.exponents)) * X

    def describe(self):
        return f"power_weights({', '.join(map(repr, self.exponents))})"


class InverseLinear(ScalingSpec):
    """T_t x = x / t."""

    name = "inverse_linear"
    acts_on = (Vector, Sequence)

    def act(self, t, x):
        return type(x)(x.values / t)

    def act_array(self, t, X):
        return X / _col(t, X)


@dataclass(frozen=True, eq=False, repr=False)
class ComponentSubset(ScalingSpec):
    """Scale only the listed coordinates (1-based, as in the coordinate moduli)."""

    indices: tuple
    name = "component_subset"
    acts_on = (Vector, Sequence)

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    def act(self, t, x):
        v = np.array(x.values)
        idx = [i - 1 for i in self.indices if i <= v.size]
        if isinstance(x, Vector) and len(idx) != len(self.indices):
            raise IncompatibleVariant("component index out of range")
        v[idx] *= t
        return type(x)(v)

    def act_array(self, t, X):
        Y = np.array(X, dtype=float)
        Y[:, [i - 1 for i in self.indices]] *= _col(t, X)
        return Y

    def describe(self):
        return f"component_subset({', '.join(map(str, self.indices))})"


class LogShift(ScalingSpec):
    """T_t y = y + log t (componentwise)."""

    name = "log_shift"
    acts_on = (Vector,)

    def act(self, t, x):
        return Vector(x.values + math.log(t))

    def act_array(self, t, X):
        return X + np.log(_col(t, X))


@dataclass(frozen=True, eq=False, repr=False)
class AffineInverse(ScalingSpec):
    """T_t y = a + (y - a) / t (componentwise)."""

    anchor: float
    name = "affine_inverse"
    acts_on = (Vector,)

    def act(self, t, x):
        return Vector(self.anchor + (x.values - self.anchor) / t)

    def act_array(self, t, X):
        return self.anchor + (X - self.anchor) / _col(t, X)

    def describe(self):
        return f"affine_inverse({self.anchor!r})"


class MinShift(ScalingSpec):
    """T_t x = x + (t - 1) min(x_1, x_2) (1, 1) on the closed positive quadrant."""

    name = "min_shift"
    acts_on = (Vector,)

    def act(self, t, x):
        if x.dim != 2:
            raise IncompatibleVariant("min_shift acts on 2-vectors")
        return Vector(x.values + (t - 1.0) * x.values.min())

    def act_array(self, t, X):
        return X + (_col(t, X) - 1.0) * X.min(axis=1, keepdims=True)


class FunctionValues(ScalingSpec):
    name = "function_values"
    acts_on = (GridFunction,)

    def act(self, t, x):
        return GridFunction(t * x.values, x.a, x.b)


@dataclass(frozen=True, eq=False, repr=False)
class Uplifted(ScalingSpec):
    """Act on every support point of a point configuration with ``base``."""

    base: ScalingSpec
    name = "uplifted"
    acts_on = (PointConfig,)

    def act(self, t, x):
        if x.points.shape[0] == 0:
            return x
        pts = self.base.act_array(t, x.points)
        return PointConfig(pts, x.multiplicities, x.marks, dim=x.dim)

    def describe(self):
        return f"uplifted({self.base.describe()})"


class SetLinear(ScalingSpec):
    name = "set_linear"
    acts_on = (Polytope,)

    def act(self, t, x):
        return Polytope(t * x.vertices, hull=False)


def _check(s, t, x):
    if not (isinstance(t, (int, float, np.floating, np.integer)) and t > 0 and math.isfinite(t)):
        raise NonpositiveScale(f"scale must be a positive finite real, got {t!r}")
    if not isinstance(x, s.acts_on):
        raise IncompatibleVariant(f"{s.describe()} cannot act on {type(x).__name__}")


def apply_scaling(s: ScalingSpec, t: float, x: Element) -> Element:
    """Return T_t x."""
    _check(s, t, x)
    if t == 1:
        return x
    return s.act(float(t), x)


def invert_scaling(s: ScalingSpec, t: float, x: Element) -> Element:
    """Return T_{1/t} x."""
    _check(s, t, x)
    if t == 1:
        return x
    return s.act(1.0 / float(t), x)


def apply_scaling_array(s: ScalingSpec, t, X):
    """Vectorised T_t on rows of an (n, d) array; ``t`` may vary per row."""
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)) or np.any(~np.isfinite(t)):
        raise NonpositiveScale("scales must be positive and finite")
    return s.act_array(t, np.asarray(X, dtype=float))


_SCALINGS = {
    "linear": Linear,
    "inverse_linear": InverseLinear,
    "log_shift": LogShift,
    "min_shift": MinShift,
    "function_values": FunctionValues,
    "set_linear": SetLinear,
}


def scaling_from_name(name: str, args: Seq = ()) -> ScalingSpec:
    if name in _SCALINGS:
        return _SCALINGS[name]()
    if name == "power_weights":
        return PowerWeights(tuple(args))
    if name == "component_subset":
        return ComponentSubset(tuple(args))
    if name == "affine_inverse":
        (a,) = args
        return AffineInverse(float(a))
    raise KeyError(name)
