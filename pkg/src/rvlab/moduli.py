"""Moduli (1-homogeneous functionals), ideals generated by them, and helpers.

A modulus ``tau`` satisfies ``tau(T_t x) = t * tau(x)`` under its paired
scaling.  Coordinates are numbered from 1.  Every modulus evaluates single
elements through ``__call__``; vector moduli also evaluate (n, d) arrays
through :meth:`Modulus.batch`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry, kernels
from .core import (
    GridFunction,
    Linear,
    PointConfig,
    Polytope,
    ScalingSpec,
    SetLinear,
    Sequence,
    Uplifted,
    Vector,
    invert_scaling,
)
from .errors import IncompatibleVariant, NonMonotoneOracle
from .grammar import parse, unparse


class Modulus:
    name = "modulus"
    accepts: tuple = (Vector, Sequence)

    @property
    def scaling(self) -> ScalingSpec:
        return Linear()

    def __call__(self, x) -> float:
        if not isinstance(x, self.accepts):
            raise IncompatibleVariant(f"{self.describe()} is not defined on {type(x).__name__}")
        return float(self._eval(x))

    def _eval(self, x):
        return self.batch(np.asarray(x.values, dtype=float)[None, :])[0]

    def batch(self, X):
        raise IncompatibleVariant(f"{self.describe()} has no vectorised form")

    def evaluate_many(self, xs):
        """Values on a list of elements or an (n, d) array of vectors."""
        if isinstance(xs, np.ndarray):
            return self.batch(xs if xs.ndim == 2 else xs[:, None])
        return np.array([self(x) for x in xs], dtype=float)

    def args(self):
        return []

    def describe(self):
        return unparse((self.name, self.args()))

    def __repr__(self):
        return self.describe()

    def __eq__(self, other):
        return isinstance(other, Modulus) and self.describe() == other.describe()

    def __hash__(self):
        return hash(self.describe())


def _coords(X, dim=None):
    X = np.abs(np.asarray(X, dtype=float))
    if dim is not None and X.shape[1] != dim:
        raise IncompatibleVariant(f"expected {dim}-vectors, got {X.shape[1]}")
    return X


def _check_seq(x):
    if isinstance(x, Sequence):
        raise IncompatibleVariant("modulus is not truncation-stable on sequences")


@dataclass(frozen=True, eq=False, repr=False)
class Norm(Modulus):
    """l_p (quasi-)norm, p in (0, inf]."""

    p: float = 2.0
    name = "norm"

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("p must be positive")

    def args(self):
        return [self.p]

    def batch(self, X):
        X = _coords(X)
        if math.isinf(self.p):
            return X.max(axis=1, initial=0.0)
        if self.p == 2:
            return np.sqrt(np.einsum("ij,ij->i", X, X))
        if self.p == 1:
            return X.sum(axis=1)
        return np.sum(X**self.p, axis=1) ** (1.0 / self.p)


class MaxAbsCoord(Modulus):
    name = "max_abs"

    def batch(self, X):
        return _coords(X).max(axis=1, initial=0.0)


class MinAbsCoord(Modulus):
    name = "min_abs"
    accepts = (Vector,)

    def batch(self, X):
        return _coords(X).min(axis=1)


@dataclass(frozen=True, eq=False, repr=False)
class CoordAbs(Modulus):
    """|x_i| (1-based)."""

    i: int
    name = "coord_abs"

    def args(self):
        return [self.i]

    def _eval(self, x):
        v = x.values
        if self.i > v.size:
            if isinstance(x, Sequence):
                return 0.0
            raise IncompatibleVariant(f"coordinate {self.i} of a {v.size}-vector")
        return abs(v[self.i - 1])

    def batch(self, X):
        return np.abs(np.asarray(X, dtype=float)[:, self.i - 1])


@dataclass(frozen=True, eq=False, repr=False)
class KthLargestCoord(Modulus):
    """k-th largest |x_i|; generates the product ideal of order k."""

    k: int
    name = "kth_largest_coord"

    def args(self):
        return [self.k]

    def _eval(self, x):
        v = np.abs(x.values)
        if v.size < self.k:
            return 0.0
        return float(np.partition(v, v.size - self.k)[v.size - self.k])

    def batch(self, X):
        X = _coords(X)
        d = X.shape[1]
        if d < self.k:
            return np.zeros(X.shape[0])
        return np.partition(X, d - self.k, axis=1)[:, d - self.k]


def _beta_terms(X, beta):
    X = _coords(X, 2)
    with np.errstate(divide="ignore"):
        l1, l2 = np.log(X[:, 0]), np.log(X[:, 1])
    with np.errstate(invalid="ignore"):
        a = np.exp(beta * l1 + (1.0 - beta) * l2)
        b = np.exp((1.0 - beta) * l1 + beta * l2)
    # 0 * -inf patterns when beta in {0, 1}
    if beta == 0.0:
        a, b = X[:, 1], X[:, 0]
    return np.nan_to_num(a, nan=0.0), np.nan_to_num(b, nan=0.0)


@dataclass(frozen=True, eq=False, repr=False)
class BetaStar(Modulus):
    """max(x1^b x2^(1-b), x1^(1-b) x2^b) on |x|, b in [0, 1/2]."""

    beta: float
    name = "beta_star"
    accepts = (Vector,)

    def __post_init__(self):
        if not 0.0 <= self.beta <= 0.5:
            raise ValueError("beta must lie in [0, 1/2]")

    def args(self):
        return [self.beta]

    def batch(self, X):
        a, b = _beta_terms(X, self.beta)
        return np.maximum(a, b)


@dataclass(frozen=True, eq=False, repr=False)
class BetaMin(Modulus):
    """min(x1^b x2^(1-b), x1^(1-b) x2^b) on |x|, b in [0, 1/2]."""

    beta: float
    name = "beta_min"
    accepts = (Vector,)

    def __post_init__(self):
        if not 0.0 <= self.beta <= 0.5:
            raise ValueError("beta must lie in [0, 1/2]")

    def args(self):
        return [self.beta]

    def batch(self, X):
        a, b = _beta_terms(X, self.beta)
        return np.minimum(a, b)


@dataclass(frozen=True, eq=False, repr=False)
class PositiveLinear(Modulus):
    """max(0, <w, x>)."""

    weights: tuple
    name = "positive_linear"
    accepts = (Vector,)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    def args(self):
        return [list(self.weights)]

    def batch(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[1] != len(self.weights):
            raise IncompatibleVariant("weight length does not match dimension")
        return np.maximum(0.0, X @ np.array(self.weights))


@dataclass(frozen=True, eq=False, repr=False)
class AxisValue(Modulus):
    """|x_i| if every other coordinate vanishes, else 0 (homogeneous, discontinuous)."""

    i: int
    name = "axis_value"
    accepts = (Vector,)

    def args(self):
        return [self.i]

    def batch(self, X):
        X = np.abs(np.asarray(X, dtype=float))
        others = np.delete(X, self.i - 1, axis=1)
        on_axis = np.all(others == 0.0, axis=1)
        return np.where(on_axis, X[:, self.i - 1], 0.0)


@dataclass(frozen=True, eq=False, repr=False)
class Scaled(Modulus):
    """c * inner."""

    c: float
    inner: Modulus
    name = "scaled"

    def args(self):
        return [self.c, parse(self.inner.describe())]

    @property
    def accepts(self):
        return self.inner.accepts

    @property
    def scaling(self):
        return self.inner.scaling

    def _eval(self, x):
        return self.c * self.inner(x)

    def batch(self, X):
        return self.c * self.inner.batch(X)


# -- grid functions ----------------------------------------------------------


class _FunctionModulus(Modulus):
    accepts = (GridFunction,)

    @property
    def scaling(self):
        return Linear()


class SupAbs(_FunctionModulus):
    name = "sup_abs"

    def _eval(self, x):
        return np.max(np.abs(x.values))

    def batch(self, X):
        return np.abs(X).max(axis=1)


class InfAbs(_FunctionModulus):
    """inf |x(u)|; a piecewise-linear function crossing zero gives 0."""

    name = "inf_abs"

    def _eval(self, x):
        return self.batch(x.values[None, :])[0]

    def batch(self, X):
        X = np.asarray(X, dtype=float)
        crosses = np.any(X[:, :-1] * X[:, 1:] <= 0.0, axis=1)
        return np.where(crosses, 0.0, np.abs(X).min(axis=1))


@dataclass(frozen=True, eq=False, repr=False)
class ValueAt(_FunctionModulus):
    u0: float
    name = "value_at"

    def args(self):
        return [self.u0]

    def _eval(self, x):
        return abs(float(x(self.u0)))


def snap_window(eps, step):
    """Largest w with w * step <= eps (up to 1e-9 relative slack)."""
    return int(math.floor(eps / step * (1.0 + 1e-9)))


@dataclass(frozen=True, eq=False, repr=False)
class Oscillation(_FunctionModulus):
    """sup of |x(u1) - x(u2)| over |u1 - u2| <= eps.

    Exact on piecewise-linear functions once eps is a multiple of the grid
    step; eps is rounded down to such a multiple.
    """

    eps: float
    name = "oscillation"

    def args(self):
        return [self.eps]

    def _eval(self, x):
        w = snap_window(self.eps, x.step)
        return float(kernels.sliding_range(x.values[None, :], w)[0])

    def batch_grid(self, X, step):
        return kernels.sliding_range(np.asarray(X, dtype=float), snap_window(self.eps, step))


class QuotientRange(_FunctionModulus):
    """(sup x - inf x) / 2."""

    name = "quotient_range"

    def _eval(self, x):
        return 0.5 * (np.max(x.values) - np.min(x.values))

    def batch(self, X):
        return 0.5 * (X.max(axis=1) - X.min(axis=1))


# -- point configurations ----------------------------------------------------


@dataclass(frozen=True, eq=False, repr=False)
class KthLargestPoint(Modulus):
    """k-th largest inner modulus over support points counted with multiplicity; 0 if fewer."""

    k: int
    inner: Modulus = field(default_factory=lambda: Norm(2.0))
    name = "kth_largest_point"
    accepts = (PointConfig,)

    def args(self):
        return [self.k, parse(self.inner.describe())]

    @property
    def scaling(self):
        return Uplifted(self.inner.scaling)

    def _eval(self, x):
        if x.total < self.k:
            return 0.0
        vals = np.repeat(self.inner.batch(x.points), x.multiplicities)
        return float(np.sort(vals)[::-1][self.k - 1])


# -- convex sets -------------------------------------------------------------


class _SetModulus(Modulus):
    accepts = (Polytope,)

    @property
    def scaling(self):
        return SetLinear()


class SetSup(_SetModulus):
    """sup over K of the Euclidean norm."""

    name = "set_sup"

    def _eval(self, x):
        return geometry.sup_norm(x.vertices)


class SetInf(_SetModulus):
    """inf over K of the Euclidean norm; +inf for the empty configuration."""

    name = "set_inf"
    accepts = (Polytope, PointConfig)

    @property
    def scaling(self):
        return SetLinear()

    def __call__(self, x):
        if isinstance(x, PointConfig):
            if x.points.shape[0] == 0:
                return math.inf
            return float(np.min(np.linalg.norm(x.points, axis=1)))
        return super().__call__(x)

    def _eval(self, x):
        return geometry.distance_to_origin(x.vertices)


class InscribedRadius(_SetModulus):
    name = "inscribed_radius"

    def _eval(self, x):
        return geometry.inscribed_radius(x.vertices)


@dataclass(frozen=True, eq=False, repr=False)
class IntrinsicVolumeRoot(_SetModulus):
    """V_i(K)^(1/i) in the plane: V_1 = perimeter / 2, V_2 = area."""

    i: int
    name = "intrinsic_volume_root"

    def __post_init__(self):
        if self.i not in (1, 2):
            raise ValueError("planar intrinsic volumes of order 1 or 2")

    def args(self):
        return [self.i]

    def _eval(self, x):
        if self.i == 1:
            return 0.5 * geometry.perimeter(x.vertices)
        return math.sqrt(geometry.area(x.vertices))


class MeanWidth(_SetModulus):
    """Average of the support function over the unit circle."""

    name = "mean_width"

    def _eval(self, x):
        return geometry.exact_mean_width(x.vertices)


# -- combinators -------------------------------------------------------------


class _Combinator(Modulus):
    reducer = None

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise ValueError("combinator needs at least one modulus")
        self.parts = parts

    @property
    def accepts(self):
        common = set(self.parts[0].accepts)
        for p in self.parts[1:]:
            common &= set(p.accepts)
        return tuple(common)

    @property
    def scaling(self):
        return self.parts[0].scaling

    def args(self):
        return [parse(p.describe()) for p in self.parts]

    def _eval(self, x):
        return type(self).reducer([p(x) for p in self.parts])

    def batch(self, X):
        vals = np.stack([p.batch(X) for p in self.parts])
        return type(self).array_reducer(vals, axis=0)


class MaxOf(_Combinator):
    name = "max_of"
    reducer = max
    array_reducer = np.max


class MinOf(_Combinator):
    name = "min_of"
    reducer = min
    array_reducer = np.min


_SIMPLE = {
    "max_abs": MaxAbsCoord,
    "min_abs": MinAbsCoord,
    "sup_abs": SupAbs,
    "inf_abs": InfAbs,
    "quotient_range": QuotientRange,
    "set_sup": SetSup,
    "set_inf": SetInf,
    "inscribed_radius": InscribedRadius,
    "mean_width": MeanWidth,
}
_ONE_ARG = {
    "norm": Norm,
    "coord_abs": CoordAbs,
    "kth_largest_coord": KthLargestCoord,
    "beta_star": BetaStar,
    "beta_min": BetaMin,
    "value_at": ValueAt,
    "oscillation": Oscillation,
    "intrinsic_volume_root": IntrinsicVolumeRoot,
    "axis_value": AxisValue,
}


def modulus_from_tree(node):
    name, args = node
    if name in _SIMPLE:
        if args:
            raise ValueError(f"{name} takes no arguments")
        return _SIMPLE[name]()
    if name in _ONE_ARG:
        if len(args) != 1:
            raise ValueError(f"{name} takes one argument")
        return _ONE_ARG[name](args[0])
    if name == "positive_linear":
        (w,) = args
        return PositiveLinear(tuple(w))
    if name == "scaled":
        c, inner = args
        return Scaled(float(c), modulus_from_tree(inner))
    if name == "kth_largest_point":
        k = args[0]
        inner = modulus_from_tree(args[1]) if len(args) > 1 else Norm(2.0)
        return KthLargestPoint(int(k), inner)
    if name == "max_of":
        return MaxOf([modulus_from_tree(a) for a in args])
    if name == "min_of":
        return MinOf([modulus_from_tree(a) for a in args])
    raise ValueError(f"unknown modulus {name!r}")


def parse_modulus(text: str) -> Modulus:
    """Build a modulus from its config string, e.g. ``"beta_star(0.25)"``."""
    return modulus_from_tree(parse(text))


def eval_modulus(m: Modulus, x) -> float:
    return m(x)


# -- ideals ------------------------------------------------------------------


@dataclass
class IdealSpec:
    """Ideal generated by moduli: a set is bounded iff inf over it of the max generator is > 0.

    ``product`` holds ``(m, k)`` for the k-th product ideal over coordinates
    1..m; ``graph`` holds an adjacency list over coordinates 1..m.  Either
    structure derives its generators as minima of coordinate moduli over
    admissible index sets (k-subsets, or closed neighbourhoods of nodes).
    """

    generators: list
    product: tuple | None = None
    graph: dict | None = None

    def __post_init__(self):
        if not self.generators:
            raise ValueError("an ideal needs at least one generator")

    @classmethod
    def product_ideal(cls, m, k):
        gens = [
            MinOf([CoordAbs(i) for i in subset])
            for subset in itertools.combinations(range(1, m + 1), k)
        ]
        return cls(gens, product=(m, k))

    @classmethod
    def graph_product(cls, adjacency):
        adj = {int(i): {int(j) for j in nbrs} for i, nbrs in adjacency.items()}
        for i, nbrs in list(adj.items()):
            for j in nbrs:
                adj.setdefault(j, set()).add(i)
        gens = [MinOf([CoordAbs(j) for j in sorted(adj[i] | {i})]) for i in sorted(adj)]
        return cls(gens, graph={i: sorted(v) for i, v in adj.items()})

    @classmethod
    def from_edges(cls, edges, nodes=None):
        adj = {i: set() for i in (nodes or [])}
        for a, b in edges:
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
        return cls.graph_product(adj)

    def admissible_sets(self):
        if self.product is not None:
            m, k = self.product
            return [set(s) for s in itertools.combinations(range(1, m + 1), k)]
        if self.graph is not None:
            return [set(v) | {i} for i, v in sorted(self.graph.items())]
        return None

    def threshold(self, x):
        return max(g(x) for g in self.generators)

    def threshold_many(self, X):
        if self.product is not None and isinstance(X, np.ndarray):
            return KthLargestCoord(self.product[1]).batch(X)
        vals = np.stack([g.evaluate_many(X) for g in self.generators])
        return vals.max(axis=0)

    def describe(self):
        if self.product is not None:
            return f"product({self.product[0]}, {self.product[1]})"
        if self.graph is not None:
            return f"graph({sorted((i, tuple(v)) for i, v in self.graph.items())})"
        return unparse(("ideal", [parse(g.describe()) for g in self.generators]))


def ideal_threshold(spec: IdealSpec, x) -> float:
    """max over generators of tau_i(x): x is in the level-eps bounded set iff this is >= eps."""
    return spec.threshold(x)


def parse_ideal(value) -> IdealSpec:
    """``"product(3, 2)"``, ``"graph([[1, 2], [3, 4]])"``, or one or more modulus strings."""
    if isinstance(value, (list, tuple)):
        return IdealSpec([parse_modulus(v) for v in value])
    name, args = parse(value)
    if name == "product":
        m, k = args
        return IdealSpec.product_ideal(int(m), int(k))
    if name == "graph":
        (edges,) = args
        return IdealSpec.from_edges([tuple(e) for e in edges])
    return IdealSpec([parse_modulus(value)])


# -- semicones and domination ----------------------------------------------


def modulus_from_semicone(member, x, s, rtol=1e-9, max_iter=200, max_doublings=2100):
    """sup{t > 0 : T_{1/t} x in V} for an open semicone V given by ``member``.

    The bracket is found by doubling (or halving) from t = 1, then refined by
    bisection.  Returns 0 when no probed t admits x.
    """

    def inside(t):
        return bool(member(invert_scaling(s, t, x)))

    t = 1.0
    if inside(t):
        lo, hi = t, None
        for _ in range(max_doublings):
            t *= 2.0
            if not math.isfinite(t):
                return math.inf
            if inside(t):
                lo = t
            else:
                hi = t
                break
        if hi is None:
            return math.inf
    else:
        lo, hi = None, t
        for _ in range(max_doublings):
            t *= 0.5
            if not math.isfinite(1.0 / t):
                return 0.0
            if inside(t):
                lo = t
                break
            hi = t
        if lo is None:
            return 0.0
    for _ in range(max_iter):
        if hi - lo <= rtol * hi:
            break
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    # orbits must stay in V below the threshold and outside above it;
    # probed on a geometric grid around the bracket
    for f in _MONOTONE_PROBES:
        below, above = lo / f, hi * f
        if (math.isfinite(1.0 / below) and not inside(below)) or (math.isfinite(above) and inside(above)):
            raise NonMonotoneOracle("membership is not monotone along the orbit of x")
    return 0.5 * (lo + hi)


_MONOTONE_PROBES = (1.001,) + tuple(1.3**j for j in range(1, 17))


@dataclass
class DominationReport:
    dominates: bool
    witness_ratio: float
    witness: object
    n: int
    note: str = "Monte Carlo evidence over sampled points, not a proof"


def near_axis_sampler(dim=2, positive=True):
    """Points spread over directions with some coordinates pushed towards zero."""

    def draw(stream, n):
        u = stream.uniform_matrix(0, n, dim + 2)
        radius = np.exp(20.0 * (u[:, 0] - 0.5))
        coords = u[:, 2 : 2 + dim]
        shrink = 10.0 ** (-12.0 * u[:, 1])
        pick = np.floor(coords[:, 0] * dim).astype(int)
        x = np.array(coords)
        x[np.arange(n), pick] *= shrink
        if not positive:
            x *= np.where(stream.child("sign").uniform_matrix(0, n, dim) < 0.5, -1.0, 1.0)
        return radius[:, None] * x

    return draw


def check_domination(m1: Modulus, m2: Modulus, sampler, n: int, seed=0, bound=1e6):
    """Monte Carlo search for sup m1(x) / m2(x).

    ``dominates`` is true when the largest sampled ratio stays below
    ``bound``, i.e. there is evidence that ``m1 <= c * m2``.
    """
    from .rng import Stream

    if n < 1:
        raise ValueError("n must be at least 1")
    X = sampler(Stream(seed, "domination"), n)
    a, b = m1.evaluate_many(X), m2.evaluate_many(X)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(b > 0, a / b, np.where(a > 0, np.inf, 0.0))
    i = int(np.argmax(ratio))
    worst = float(ratio[i])
    witness = X[i] if isinstance(X, np.ndarray) else X[i]
    return DominationReport(worst <= bound, worst, witness, n)
