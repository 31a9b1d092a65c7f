"""Counter-based random streams.

The generator is SplitMix64 used in counter mode: draw ``i`` of the stream
with key ``k`` is ``mix64(k + (i + 1) * 0x9E3779B97F4A7C15)``.  Any draw is
addressable by its index, so a batch can be cut into blocks and generated on
any number of workers with identical output.  Keys are derived from a user
seed and a tuple of stream identifiers by repeated mixing.
"""

import zlib

import numpy as np
from scipy import stats

from . import kernels, parallel

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
BLOCK = 1 << 20

# attempts reserved per element in rejection samplers
_MAX_ATTEMPTS = 64


def mix64(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _ident(x):
    if isinstance(x, str):
        return zlib.crc32(x.encode()) | (1 << 40)
    return int(x) & MASK64


def derive_key(seed, *ids):
    """Key of the stream named by ``ids`` under ``seed``."""
    k = mix64((int(seed) & MASK64) ^ 0x5851F42D4C957F2D)
    for x in ids:
        k = mix64(k ^ mix64(_ident(x) + GAMMA))
    return k


class Stream:
    """An addressable stream of draws.

    ``start`` arguments are element indices; each method documents how many
    raw counters one element consumes so that different methods on the same
    stream are not mixed by accident.  Use :meth:`child` for independent
    fields.
    """

    def __init__(self, seed, *ids):
        self.seed = int(seed)
        self.ids = ids
        self.key = derive_key(seed, *ids)

    def child(self, *ids):
        return Stream(self.seed, *(self.ids + ids))

    def uniform(self, start, count):
        """Uniforms in (0, 1); one counter per element."""
        key = self.key
        if count <= BLOCK:
            return kernels.uniform_fill(key, start, count)
        parts = parallel.map_blocks(
            lambda lo, hi: kernels.uniform_fill(key, start + lo, hi - lo), count, BLOCK
        )
        return np.concatenate(parts)

    def uniform_matrix(self, start, count, width):
        """Rows ``start .. start+count-1`` of a (rows, width) uniform matrix."""
        return self.uniform(start * width, count * width).reshape(count, width)

    def normal(self, start, count):
        """Standard normals by Box-Muller; two counters per element."""
        u = self.uniform(2 * start, 2 * count)
        u1, u2 = u[0::2], u[1::2]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def exponential(self, start, count):
        return -np.log(self.uniform(start, count))

    def pareto(self, alpha, start, count):
        """P{X > x} = x**-alpha for x >= 1."""
        return self.uniform(start, count) ** (-1.0 / alpha)

    def categorical(self, weights, start, count):
        """Indices drawn proportionally to ``weights``."""
        w = np.asarray(weights, dtype=float)
        cum = np.cumsum(w)
        cum /= cum[-1]
        idx = np.searchsorted(cum, self.uniform(start, count), side="right")
        return np.minimum(idx, len(w) - 1)

    def poisson(self, lam, start):
        """Poisson counts by inversion; one counter per element."""
        lam = np.asarray(lam, dtype=float)
        u = self.uniform(start, lam.size).reshape(lam.shape)
        out = stats.poisson.ppf(u, lam)
        return np.where(lam > 0, out, 0).astype(np.int64)

    def gamma(self, shape, start):
        """Gamma(shape, 1) variates by the Marsaglia-Tsang squeeze.

        Element ``i`` owns attempts ``i * 64 .. i * 64 + 63``; each attempt
        uses three counters.  Shapes below one are boosted with an extra
        uniform from a child stream.
        """
        shape = np.asarray(shape, dtype=float)
        flat = shape.ravel()
        out = np.zeros(flat.size)
        pos = flat > 0
        a = np.where(flat < 1, flat + 1.0, flat)
        d = a - 1.0 / 3.0
        c = 1.0 / np.sqrt(9.0 * d)
        todo = np.nonzero(pos)[0]
        for j in range(_MAX_ATTEMPTS):
            if todo.size == 0:
                break
            base = ((start + todo) * _MAX_ATTEMPTS + j) * 3
            draws = np.stack([self._at(base + s) for s in range(3)])
            x = np.sqrt(-2.0 * np.log(draws[0])) * np.cos(2.0 * np.pi * draws[1])
            v = (1.0 + c[todo] * x) ** 3
            ok = v > 0
            with np.errstate(divide="ignore", invalid="ignore"):
                accept = ok & (
                    np.log(draws[2])
                    < 0.5 * x * x + d[todo] - d[todo] * v + d[todo] * np.log(np.where(ok, v, 1.0))
                )
            done = todo[accept]
            out[done] = d[done] * v[accept]
            todo = todo[~accept]
        if todo.size:
            raise RuntimeError("gamma sampler exhausted its attempt budget")
        small = pos & (flat < 1)
        if small.any():
            idx = np.nonzero(small)[0]
            u = self.child("boost")._at(start + idx)
            out[idx] *= u ** (1.0 / flat[idx])
        return out.reshape(shape.shape)

    def _at(self, counters):
        """Uniforms at arbitrary counters."""
        counters = np.asarray(counters, dtype=np.int64)
        if counters.size == 0:
            return np.empty(0)
        if counters.size > 1 and np.all(np.diff(counters) == 1):
            return self.uniform(int(counters[0]), counters.size)
        from ._fallback import _uniform_counters

        return _uniform_counters(self.key, counters.astype(np.uint64))
