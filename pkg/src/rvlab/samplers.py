"""Seeded generators of regularly varying random elements.

Every generator draws element ``i`` from counters that depend only on ``i``
(per-field child streams, or a per-element substream for variable-size
elements), so ``sample(gen, seed, n)`` is a prefix of
``sample(gen, seed, n + 1)`` and the output does not depend on the number
of workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    GridFunction,
    Linear,
    MinShift,
    PointConfig,
    Polytope,
    Sequence,
    Vector,
    apply_scaling,
    DEFAULT_GRID,
)
from .errors import BadParameters
from .rng import Stream


def _positive(name, value):
    if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
        raise BadParameters(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def _count(name, value, minimum=1):
    if int(value) != value or value < minimum:
        raise BadParameters(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


class GeneratorSpec:
    """Law of a random element.

    Subclasses implement :meth:`draw`; vector-valued laws implement
    :meth:`draw_array` instead and set ``dim``.
    """

    name = "generator"
    dim: int | None = None

    def draw(self, stream: Stream, start: int, count: int):
        arr = self.draw_array(stream, start, count)
        return [Vector(row) for row in arr]

    def draw_array(self, stream, start, count):
        raise BadParameters(f"{self.name} does not produce vectors")

    @property
    def vector_valued(self):
        return self.dim is not None


class UniformTransform(GeneratorSpec):
    """Scalar law X = h(U) with h decreasing, so max X_i = h(min U_i).

    ``survival(x) = P{X > x}`` equals the U-threshold below which a draw
    exceeds x.
    """

    dim = 1

    def from_uniform(self, u):
        raise NotImplementedError

    def survival(self, x):
        raise NotImplementedError

    def quantile(self, p):
        """Smallest x with P{X <= x} >= p."""
        return float(self.from_uniform(np.asarray(1.0 - p)))

    def draw_array(self, stream, start, count):
        return self.from_uniform(stream.uniform(start, count))[:, None]


@dataclass(frozen=True)
class Pareto(UniformTransform):
    """P{X > x} = x**-alpha, x >= 1."""

    alpha: float = 1.0
    name = "pareto"

    def __post_init__(self):
        _positive("alpha", self.alpha)

    def from_uniform(self, u):
        return u ** (-1.0 / self.alpha)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 1.0, 1.0, np.power(np.maximum(x, 1.0), -self.alpha))


@dataclass(frozen=True)
class WeibullTail(UniformTransform):
    """X = a - 1 / P with P Pareto(alpha); P{X > a - x} = x**alpha for x <= 1."""

    alpha: float = 1.0
    endpoint: float = 0.0
    name = "weibull_tail"

    def __post_init__(self):
        _positive("alpha", self.alpha)

    def from_uniform(self, u):
        return self.endpoint - u ** (1.0 / self.alpha)

    def survival(self, x):
        gap = self.endpoint - np.asarray(x, dtype=float)
        return np.clip(gap, 0.0, 1.0) ** self.alpha


@dataclass(frozen=True)
class LogPareto(UniformTransform):
    """X = log P with P Pareto(alpha); P{X > u} = exp(-alpha u), u >= 0."""

    alpha: float = 1.0
    name = "log_pareto"

    def __post_init__(self):
        _positive("alpha", self.alpha)

    def from_uniform(self, u):
        return -np.log(u) / self.alpha

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-self.alpha * np.maximum(x, 0.0))


@dataclass(frozen=True)
class ParetoPairIID(GeneratorSpec):
    """Two independent Pareto(alpha) coordinates."""

    alpha: float = 1.0
    name = "pareto_pair"
    dim = 2

    def __post_init__(self):
        _positive("alpha", self.alpha)

    def draw_array(self, stream, start, count):
        return stream.uniform_matrix(start, count, 2) ** (-1.0 / self.alpha)


@dataclass(frozen=True)
class ParetoVector(GeneratorSpec):
    """d independent Pareto(alpha) coordinates."""

    alpha: float = 1.0
    d: int = 2
    name = "pareto_vector"

    def __post_init__(self):
        _positive("alpha", self.alpha)
        _count("d", self.d)

    @property
    def dim(self):
        return self.d

    def draw_array(self, stream, start, count):
        return stream.uniform_matrix(start, count, self.d) ** (-1.0 / self.alpha)


@dataclass(frozen=True)
class SpectralRV(GeneratorSpec):
    """T_R U with P{R > r} = r**-alpha (r >= 1) and U drawn from the normalised spectral atoms."""

    tail: object
    name = "spectral_rv"

    @property
    def alpha(self):
        return self.tail.alpha

    @property
    def dim(self):
        locs = self.tail.spectral.locations
        if isinstance(self.tail.scaling, Linear) and all(isinstance(u, Vector) for u in locs):
            return locs[0].dim
        return None

    def _parts(self, stream, start, count):
        r = stream.child("radius").pareto(self.tail.alpha, start, count)
        idx = stream.child("direction").categorical(self.tail.spectral.weights, start, count)
        return r, idx

    def draw_array(self, stream, start, count):
        r, idx = self._parts(stream, start, count)
        U = np.array([u.values for u in self.tail.spectral.locations])
        return r[:, None] * U[idx]

    def draw(self, stream, start, count):
        if self.dim is not None:
            return super().draw(stream, start, count)
        r, idx = self._parts(stream, start, count)
        locs = self.tail.spectral.locations
        return [apply_scaling(self.tail.scaling, float(ri), locs[j]) for ri, j in zip(r, idx)]


@dataclass(frozen=True)
class DombryRibatet(GeneratorSpec):
    """zeta (eta, 1) + (1 - zeta) (sqrt(eta), 0) with zeta fair Bernoulli, eta Pareto(alpha)."""

    alpha: float = 1.0
    name = "dombry_ribatet"
    dim = 2

    def __post_init__(self):
        _positive("alpha", self.alpha)

    def draw_array(self, stream, start, count):
        eta = stream.child("eta").pareto(self.alpha, start, count)
        zeta = stream.child("zeta").uniform(start, count) < 0.5
        out = np.empty((count, 2))
        out[:, 0] = np.where(zeta, eta, np.sqrt(eta))
        out[:, 1] = np.where(zeta, 1.0, 0.0)
        return out


@dataclass(frozen=True)
class ScalingMin(GeneratorSpec):
    """T_xi eta under the min-shift scaling: eta + (xi - 1)(1, 1).

    ``eta`` lies on {min = 1}: one coordinate is 1 (fair coin), the other
    1 + Exp(1); ``xi`` is Pareto(alpha).  With ``iid=True`` the law is
    instead the pair of independent Pareto-1 coordinates, which is not
    regularly varying under this scaling.
    """

    alpha: float = 1.0
    iid: bool = False
    name = "scaling_min"
    dim = 2

    def __post_init__(self):
        _positive("alpha", self.alpha)

    @property
    def scaling(self):
        return MinShift()

    def draw_array(self, stream, start, count):
        if self.iid:
            return stream.uniform_matrix(start, count, 2) ** -1.0
        xi = stream.child("xi").pareto(self.alpha, start, count)
        side = stream.child("side").uniform(start, count) < 0.5
        other = 1.0 + stream.child("other").exponential(start, count)
        eta = np.where(side[:, None], np.stack([np.ones(count), other], 1), np.stack([other, np.ones(count)], 1))
        return eta + (xi - 1.0)[:, None]


@dataclass(frozen=True)
class BrokenLine(GeneratorSpec):
    """xi(u) = V1 u + V2 (1 - u) on [0, 1], V1, V2 iid Pareto(alpha)."""

    alpha: float = 1.0
    grid: int = DEFAULT_GRID
    name = "broken_line"

    def __post_init__(self):
        _positive("alpha", self.alpha)
        _count("grid", self.grid, 2)

    def coefficients(self, stream, start, count):
        return stream.uniform_matrix(start, count, 2) ** (-1.0 / self.alpha)

    def values(self, stream, start, count):
        V = self.coefficients(stream, start, count)
        u = np.linspace(0.0, 1.0, self.grid)
        return V[:, :1] * u + V[:, 1:] * (1.0 - u)

    def draw(self, stream, start, count):
        return [GridFunction(v) for v in self.values(stream, start, count)]


@dataclass(frozen=True)
class RandomPolynomial(GeneratorSpec):
    """xi(u) = sum_j eta_j u**j on [0, 1] with iid Pareto(alpha) coefficients eta_0..eta_degree."""

    degree: int = 1
    alpha: float = 1.0
    grid: int = DEFAULT_GRID
    name = "random_polynomial"

    def __post_init__(self):
        _count("degree", self.degree, 0)
        _positive("alpha", self.alpha)
        _count("grid", self.grid, 2)

    def values(self, stream, start, count):
        eta = stream.uniform_matrix(start, count, self.degree + 1) ** (-1.0 / self.alpha)
        u = np.linspace(0.0, 1.0, self.grid)
        powers = u[None, :] ** np.arange(self.degree + 1)[:, None]
        return eta @ powers

    def draw(self, stream, start, count):
        return [GridFunction(v) for v in self.values(stream, start, count)]


@dataclass(frozen=True)
class SpikeFunction(GeneratorSpec):
    """Triangular spike of height Pareto(alpha) and half-width ``width`` at a uniform location.

    Narrow spikes keep the oscillation modulus as large as the sup norm for
    every window wider than the spike, so tightness in C([0,1]) fails.
    """

    alpha: float = 1.0
    width: float = 0.01
    grid: int = DEFAULT_GRID
    name = "spike"

    def __post_init__(self):
        _positive("alpha", self.alpha)
        _positive("width", self.width)

    def values(self, stream, start, count):
        h = stream.child("height").pareto(self.alpha, start, count)
        c = stream.child("center").uniform(start, count)
        u = np.linspace(0.0, 1.0, self.grid)
        shape = np.maximum(0.0, 1.0 - np.abs(u[None, :] - c[:, None]) / self.width)
        return h[:, None] * shape

    def draw(self, stream, start, count):
        return [GridFunction(v) for v in self.values(stream, start, count)]


@dataclass(frozen=True)
class ExchangeableParetoSeq(GeneratorSpec):
    """xi_i = eta W_i, i = 1..length, eta Pareto(alpha), W_i iid uniform on [1 - spread, 1].

    ``spread = 0`` gives the fully dependent sequence with all coordinates equal.
    """

    length: int = 8
    alpha: float = 1.0
    spread: float = 0.5
    name = "exchangeable_pareto_seq"

    def __post_init__(self):
        _count("length", self.length)
        _positive("alpha", self.alpha)
        if not 0.0 <= self.spread < 1.0:
            raise BadParameters("spread must lie in [0, 1)")

    def values(self, stream, start, count):
        eta = stream.child("eta").pareto(self.alpha, start, count)
        w = 1.0 - self.spread * stream.child("w").uniform_matrix(start, count, self.length)
        return eta[:, None] * w

    def draw(self, stream, start, count):
        return [Sequence(v) for v in self.values(stream, start, count)]


@dataclass(frozen=True)
class StationaryMovingMax(GeneratorSpec):
    """X_i = max_j w_j Z_{i-j} over a window of length ``length``; Z iid Pareto(alpha).

    ``weights = (1,)`` gives an iid sequence.  Each element is an independent
    stretch of the stationary sequence.
    """

    length: int = 32
    weights: tuple = (1.0, 1.0)
    alpha: float = 1.0
    name = "moving_max"

    def __post_init__(self):
        _count("length", self.length)
        _positive("alpha", self.alpha)
        w = tuple(float(x) for x in self.weights)
        if not w or any(x < 0 for x in w) or not any(x > 0 for x in w):
            raise BadParameters("weights must be nonnegative and not all zero")
        object.__setattr__(self, "weights", w)

    def values(self, stream, start, count):
        q = len(self.weights) - 1
        Z = stream.uniform_matrix(start, count, self.length + q) ** (-1.0 / self.alpha)
        out = np.zeros((count, self.length))
        for j, w in enumerate(self.weights):
            out = np.maximum(out, w * Z[:, q - j : q - j + self.length])
        return out

    def draw(self, stream, start, count):
        return [Sequence(v) for v in self.values(stream, start, count)]

    def tail_process_exceedance(self, h, a):
        """lim P{X_h > a t | X_0 > t} for the moving maximum."""
        w = np.array(self.weights)
        p = w**self.alpha / np.sum(w**self.alpha)
        total = 0.0
        for j, pj in enumerate(p):
            if pj == 0 or not 0 <= j + h < len(w):
                continue
            ratio = w[j + h] / w[j]
            total += pj * min(1.0, (ratio / a) ** self.alpha) if ratio > 0 else 0.0
        return total


# -- point processes -------------------------------------------------------


def _rows(points: GeneratorSpec, stream, start, count):
    if not points.vector_valued:
        raise BadParameters("point laws must be vector valued")
    return points.draw_array(stream, start, count)


@dataclass(frozen=True)
class BinomialPP(GeneratorSpec):
    """m iid points from ``points``."""

    m: int
    points: GeneratorSpec = field(default_factory=Pareto)
    name = "binomial_pp"

    def __post_init__(self):
        _count("m", self.m)

    def counts(self, stream, start, count):
        return np.full(count, self.m, dtype=np.int64)

    def point_array(self, stream, start, count):
        X = _rows(self.points, stream.child("points"), start * self.m, count * self.m)
        return X.reshape(count, self.m, -1)

    def draw(self, stream, start, count):
        X = self.point_array(stream, start, count)
        return [PointConfig(x) for x in X]


def _offsets(counts_before, counts):
    return counts_before + np.concatenate([[0], np.cumsum(counts)[:-1]])


@dataclass(frozen=True)
class PoissonPP(GeneratorSpec):
    """Poisson process with finite intensity ``total * law(points)``."""

    total: float
    points: GeneratorSpec = field(default_factory=Pareto)
    name = "poisson_pp"

    def __post_init__(self):
        _positive("total", self.total)

    def counts(self, stream, start, count):
        return stream.child("count").poisson(np.full(count, self.total), start)

    def _point_rows(self, stream, start, count):
        # point rows are numbered in element order; rows before ``start``
        # are counted so the batch does not depend on how it is cut
        before = int(self.counts(stream, 0, start).sum()) if start else 0
        n = self.counts(stream, start, count)
        X = _rows(self.points, stream.child("points"), before, int(n.sum()))
        return n, X

    def draw(self, stream, start, count):
        n, X = self._point_rows(stream, start, count)
        bounds = np.concatenate([[0], np.cumsum(n)])
        d = self.points.dim
        return [PointConfig(X[bounds[i] : bounds[i + 1]], dim=d) for i in range(count)]


@dataclass(frozen=True)
class MarkedPP(GeneratorSpec):
    """Ground process with iid marks attached to its points."""

    ground: GeneratorSpec
    marks: GeneratorSpec = field(default_factory=Pareto)
    name = "marked_pp"

    def draw(self, stream, start, count):
        configs = self.ground.draw(stream.child("ground"), start, count)
        if isinstance(self.ground, BinomialPP):
            before = start * self.ground.m
        else:
            before = int(self.ground.counts(stream.child("ground"), 0, start).sum()) if start else 0
        total = sum(c.points.shape[0] for c in configs)
        marks = _rows(self.marks, stream.child("marks"), before, total)[:, 0]
        out, pos = [], 0
        for c in configs:
            k = c.points.shape[0]
            out.append(PointConfig(c.points, marks=marks[pos : pos + k], dim=c.dim))
            pos += k
        return out


KERNELS = {
    "triangle": lambda v, h: np.maximum(0.0, 1.0 - np.abs(v) / h),
    "box": lambda v, h: (np.abs(v) <= h).astype(float),
    "epanechnikov": lambda v, h: np.maximum(0.0, 1.0 - (v / h) ** 2),
}


def shot_noise_path(config: PointConfig, kernel="triangle", grid=None, bandwidth=0.1):
    """zeta(u) = sum_i mark_i f(u - y_i) on a grid (default 257 nodes on [0, 1])."""
    f = KERNELS[kernel] if isinstance(kernel, str) else kernel
    if grid is None:
        grid = (0.0, 1.0, DEFAULT_GRID)
    a, b, g = grid
    u = np.linspace(a, b, int(g))
    if config.points.shape[0] == 0:
        return GridFunction(np.zeros(u.size), a, b)
    marks = np.ones(config.points.shape[0]) if config.marks is None else config.marks
    if np.any(marks <= 0):
        raise BadParameters("marks must be positive")
    y = config.points[:, 0]
    mult = config.multiplicities
    vals = (mult * marks)[:, None] * f(u[None, :] - y[:, None], bandwidth)
    return GridFunction(vals.sum(axis=0), a, b)


@dataclass(frozen=True)
class ShotNoise(GeneratorSpec):
    process: GeneratorSpec
    kernel: str = "triangle"
    bandwidth: float = 0.1
    grid: int = DEFAULT_GRID
    name = "shot_noise"

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise BadParameters(f"unknown kernel {self.kernel!r}")
        _positive("bandwidth", self.bandwidth)

    def draw(self, stream, start, count):
        configs = self.process.draw(stream, start, count)
        return [shot_noise_path(c, self.kernel, (0.0, 1.0, self.grid), self.bandwidth) for c in configs]


# -- random sets -----------------------------------------------------------


@dataclass(frozen=True)
class ConvexHullOfPoints(GeneratorSpec):
    """conv{xi_1, ..., xi_m} of m iid planar points."""

    m: int = 3
    points: GeneratorSpec = field(default_factory=ParetoPairIID)
    name = "convex_hull"

    def __post_init__(self):
        _count("m", self.m)
        if self.points.dim != 2:
            raise BadParameters("convex hulls are planar")

    def point_array(self, stream, start, count):
        X = _rows(self.points, stream.child("points"), start * self.m, count * self.m)
        return X.reshape(count, self.m, 2)

    def draw(self, stream, start, count):
        return [Polytope(x) for x in self.point_array(stream, start, count)]


def _circle(n):
    th = 2.0 * np.pi * np.arange(n) / n
    return np.stack([np.cos(th), np.sin(th)], axis=1)


@dataclass(frozen=True)
class RandomBall(GeneratorSpec):
    """B_eta(xi) as an inscribed regular polygon; center and radius drawn independently."""

    center: GeneratorSpec = field(default_factory=ParetoPairIID)
    radius: GeneratorSpec = field(default_factory=Pareto)
    vertices: int = 64
    name = "random_ball"

    def __post_init__(self):
        _count("vertices", self.vertices, 3)

    def draw(self, stream, start, count):
        c = _rows(self.center, stream.child("center"), start, count)
        r = _rows(self.radius, stream.child("radius"), start, count)[:, 0]
        ring = _circle(self.vertices)
        return [Polytope(ci + ri * ring, hull=False) for ci, ri in zip(c, r)]


@dataclass(frozen=True)
class Ellipsoid(GeneratorSpec):
    """{u : sum u_i**2 / xi_i**2 <= 1} with semiaxes from a planar nonnegative law."""

    semiaxes: GeneratorSpec = field(default_factory=ParetoPairIID)
    vertices: int = 64
    name = "ellipsoid"

    def __post_init__(self):
        _count("vertices", self.vertices, 3)

    def draw(self, stream, start, count):
        S = np.abs(_rows(self.semiaxes, stream.child("semiaxes"), start, count))
        ring = _circle(self.vertices)
        return [Polytope(ring * s, hull=False) for s in S]


# -- entry points ----------------------------------------------------------


def root_stream(seed, gen):
    return Stream(seed, "sample", gen.name)


def sample(gen: GeneratorSpec, seed: int, n: int, start: int = 0):
    """Elements ``start .. start + n - 1`` of the stream of ``gen`` under ``seed``."""
    if n < 1:
        raise BadParameters("n must be at least 1")
    return gen.draw(root_stream(seed, gen), start, n)


def sample_array(gen: GeneratorSpec, seed: int, n: int, start: int = 0):
    """Vector-valued samples as an (n, d) array."""
    if n < 1:
        raise BadParameters("n must be at least 1")
    if not gen.vector_valued:
        raise BadParameters(f"{gen.name} is not vector valued")
    return gen.draw_array(root_stream(seed, gen), start, n)


def sample_values(gen, seed, n, start=0):
    """Grid values (n, g) of a function-valued generator or values of a sequence law."""
    if n < 1:
        raise BadParameters("n must be at least 1")
    if not hasattr(gen, "values"):
        raise BadParameters(f"{gen.name} has no array form")
    return gen.values(root_stream(seed, gen), start, n)


# -- covariate pairs -------------------------------------------------------


class EtaFamily:
    """Indexed family x -> law of eta_x, with a limit law W as x grows."""

    name = "eta"

    def draw(self, stream, x):
        raise NotImplementedError

    def limit(self, stream, n):
        raise NotImplementedError


def _named_law(law, stream, start, count):
    kind, *params = law
    u = stream.uniform(start, count)
    if kind == "const":
        return np.full(count, float(params[0]))
    if kind == "uniform":
        lo, hi = params
        return lo + (hi - lo) * u
    if kind == "exponential":
        return -np.log(u) * float(params[0] if params else 1.0)
    if kind == "pareto":
        return u ** (-1.0 / float(params[0]))
    if kind == "normal":
        mu, sd = params
        return mu + sd * stream.normal(start, count)
    raise BadParameters(f"unknown law {kind!r}")


@dataclass(frozen=True)
class ConstantLaw(EtaFamily):
    """eta_x = W for every x, W drawn from a named law such as ("uniform", 1, 2)."""

    law: tuple = ("uniform", 1.0, 2.0)
    name = "constant_law"

    def draw(self, stream, x):
        return _named_law(self.law, stream, 0, len(x))

    def limit(self, stream, n):
        return _named_law(self.law, stream, 0, n)


@dataclass(frozen=True)
class LLNSum(EtaFamily):
    """eta_x = y**-1 sum_{i <= floor y} zeta_i with y = x**(1/(gamma+1)).

    zeta are Gamma(shape) with mean ``mean``, so the sum is exactly Gamma
    distributed.  eta_x -> mean almost surely.
    """

    mean: float = 1.0
    shape: float = 1.0
    gamma: float = 0.0
    name = "lln_sum"

    def y_of(self, x):
        return np.asarray(x, dtype=float) ** (1.0 / (self.gamma + 1.0))

    def draw(self, stream, x):
        y = self.y_of(x)
        k = np.floor(y)
        s = stream.gamma(k * self.shape, 0) * (self.mean / self.shape)
        return s / y

    def limit(self, stream, n):
        return np.full(n, self.mean)


@dataclass(frozen=True)
class CLTSum(EtaFamily):
    """eta_x = y**-1/2 sum_{i <= floor y} zeta_i with y = x**(1/(gamma+1/2)) and zeta ~ N(0, sigma**2).

    The normal sum is drawn exactly as sqrt(floor y) * sigma * Z.
    """

    sigma: float = 1.0
    gamma: float = 0.0
    name = "clt_sum"

    def y_of(self, x):
        return np.asarray(x, dtype=float) ** (1.0 / (self.gamma + 0.5))

    def draw(self, stream, x):
        y = self.y_of(x)
        z = stream.normal(0, y.size)
        return np.sqrt(np.floor(y)) * self.sigma * z / np.sqrt(y)

    def limit(self, stream, n):
        return self.sigma * stream.normal(0, n)


def sample_pair_with_covariate(gen_xi, eta_family: EtaFamily, seed: int, n: int, array=False):
    """Pairs (xi_i, eta_{xi_i}) with eta drawn independently given xi.

    ``gen_xi`` must be scalar; with ``array=True`` the two columns are
    returned as arrays instead of a list of Vector pairs.
    """
    if n < 1:
        raise BadParameters("n must be at least 1")
    if gen_xi.dim != 1:
        raise BadParameters("the covariate must be scalar")
    root = Stream(seed, "pair", gen_xi.name, eta_family.name)
    xi = gen_xi.draw_array(root.child("xi"), 0, n)[:, 0]
    eta = eta_family.draw(root.child("eta"), xi)
    if array:
        return xi, eta
    return [(Vector([a]), Vector([b])) for a, b in zip(xi, eta)]
