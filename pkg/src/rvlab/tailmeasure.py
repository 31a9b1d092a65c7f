"""Discrete tail measures.

A tail measure is stored as ``(alpha, sigma)`` where ``sigma`` is a finite
atomic measure on the unit sphere ``{tau = 1}`` of a reference modulus.  The
measure itself is the image of ``sigma x theta_alpha`` under
``(u, r) -> T_r u`` with ``theta_alpha((s, inf)) = s**-alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Element,
    Linear,
    ScalingSpec,
    Vector,
    apply_scaling,
    element_distance,
    element_from_json,
    invert_scaling,
)
from .errors import (
    DimensionMismatch,
    InvalidInterval,
    NonMorphism,
    TrivialPushforward,
    TrivialResult,
)
from .moduli import Modulus, parse_modulus

SPHERE_TOL = 1e-9
MERGE_TOL = 1e-9


def theta_tail(alpha: float, s: float) -> float:
    """theta_alpha((s, inf)) = s**-alpha."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not s > 0:
        raise ValueError("s must be positive")
    return s ** (-alpha)


class SpectralMeasure:
    """Atoms ``(location, weight)`` on the unit sphere of ``reference``.

    Locations closer than 1e-9 (sup distance) are merged by summing weights.
    """

    def __init__(self, atoms, reference: Modulus, check=True):
        atoms = list(atoms)
        if not atoms:
            raise ValueError("a spectral measure needs at least one atom")
        locs = [a for a, _ in atoms]
        w = np.array([float(b) for _, b in atoms])
        if not np.all((w > 0) & np.isfinite(w)):
            raise ValueError("atom weights must be positive and finite")
        if check:
            vals = _modulus_values(reference, locs)
            bad = np.nonzero(~(np.abs(vals - 1.0) <= SPHERE_TOL))[0]
            if bad.size:
                i = int(bad[0])
                raise ValueError(f"atom {locs[i]!r} has modulus {vals[i]}, expected 1")
        groups = _merge_groups(locs)
        first = {}
        for i, g in enumerate(groups):
            first.setdefault(g, i)
        keep = sorted(first.values())
        sums = np.zeros(len(groups))
        np.add.at(sums, groups, w)
        self.atoms = [(locs[i], float(sums[groups[i]])) for i in keep]
        self.reference = reference

    @property
    def locations(self):
        return [a for a, _ in self.atoms]

    @property
    def weights(self):
        return np.array([w for _, w in self.atoms])

    @property
    def total(self):
        return float(self.weights.sum())

    def __len__(self):
        return len(self.atoms)

    def __repr__(self):
        return f"SpectralMeasure({len(self)} atoms, total={self.total:.6g}, ref={self.reference})"


def _modulus_values(m, locs):
    if all(isinstance(u, Vector) for u in locs) and len({u.dim for u in locs}) == 1:
        try:
            return m.batch(np.array([u.values for u in locs]))
        except Exception:
            pass
    return np.array([m(u) for u in locs])


def _merge_groups(locs):
    """Group label per location; locations within MERGE_TOL share a label."""
    n = len(locs)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if all(isinstance(u, Vector) for u in locs) and len({u.dim for u in locs}) == 1:
        from scipy.spatial import cKDTree

        pairs = cKDTree(np.array([u.values for u in locs])).query_pairs(MERGE_TOL, p=np.inf)
    else:
        pairs = [
            (i, j)
            for i in range(n)
            for j in range(i + 1, n)
            if element_distance(locs[i], locs[j]) <= MERGE_TOL
        ]
    for i, j in sorted(pairs):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    return np.array([find(i) for i in range(n)])


@dataclass
class TailMeasure:
    alpha: float
    spectral: SpectralMeasure
    scaling: ScalingSpec = Linear()

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def reference(self):
        return self.spectral.reference

    def to_json(self):
        return {
            "alpha": self.alpha,
            "atoms": [{"location": u.to_json(), "weight": w} for u, w in self.spectral.atoms],
            "reference": self.reference.describe(),
            "scaling": self.scaling.describe(),
        }

    @classmethod
    def from_json(cls, obj, scaling=None):
        from .core import scaling_from_name
        from .grammar import parse

        ref = parse_modulus(obj["reference"])
        atoms = [(element_from_json(a["location"]), a["weight"]) for a in obj["atoms"]]
        if scaling is None:
            name, args = parse(obj.get("scaling", "linear"))
            scaling = scaling_from_name(name, args)
        return cls(obj["alpha"], SpectralMeasure(atoms, ref), scaling)

    def box_mass(self, lo, hi):
        """mu of the box prod (lo_j, hi_j] for a measure on R^d under linear scaling."""
        return as_ray_segments(self).box_mass(lo, hi)


def sector_mass(mu: TailMeasure, directions, s: float, t: float = math.inf) -> float:
    """mu of {T_r u : predicate(u), s < r <= t} = sigma(A) (s**-alpha - t**-alpha)."""
    if not (s > 0 and t > s):
        raise InvalidInterval(f"need 0 < s < t, got s={s}, t={t}")
    weight = sum(w for u, w in mu.spectral.atoms if directions(u))
    radial = s ** (-mu.alpha) - (0.0 if math.isinf(t) else t ** (-mu.alpha))
    return float(weight * radial)


def _spot_check(f, mu, target_scaling, tol=1e-6):
    for u, _ in mu.spectral.atoms:
        fu = f(u)
        for t in (0.5, 3.0):
            lhs = f(apply_scaling(mu.scaling, t, u))
            rhs = apply_scaling(target_scaling, t, fu)
            scale = 1.0 + max(float(np.max(np.abs(_coords(rhs)), initial=0.0)), 0.0)
            if not element_distance(lhs, rhs) <= tol * scale:
                raise NonMorphism(f"f(T_t u) != T_t f(u) at t={t} for atom {u!r}")


def _coords(x):
    from .core import element_array

    return element_array(x)


def pushforward(mu: TailMeasure, f, target_modulus: Modulus, target_scaling=None) -> TailMeasure:
    """Image of mu under a homogeneous map f, renormalised on the target sphere."""
    s_tgt = target_scaling if target_scaling is not None else target_modulus.scaling
    _spot_check(f, mu, s_tgt)
    atoms = []
    for u, w in mu.spectral.atoms:
        fu = f(u)
        c = target_modulus(fu)
        if c > 0 and math.isfinite(c):
            atoms.append((invert_scaling(s_tgt, c, fu), w * c**mu.alpha))
    if not atoms:
        raise TrivialPushforward("every atom is mapped where the target modulus vanishes")
    return TailMeasure(mu.alpha, SpectralMeasure(atoms, target_modulus), s_tgt)


def change_modulus(mu: TailMeasure, ell: Modulus) -> TailMeasure:
    """Re-express mu through the spectral measure on {ell = 1}."""
    atoms = []
    for u, w in mu.spectral.atoms:
        c = ell(u)
        if not math.isfinite(c):
            raise ValueError(f"ell is infinite on atom {u!r}")
        if c > 0:
            atoms.append((invert_scaling(mu.scaling, c, u), w * c**mu.alpha))
    if not atoms:
        raise TrivialResult("ell vanishes on every atom")
    return TailMeasure(mu.alpha, SpectralMeasure(atoms, ell), mu.scaling)


# -- ray segments and the marginal assembly --------------------------------


@dataclass
class RaySegments:
    """Measure sum_k w_k * theta_alpha restricted to radii (r_lo_k, r_hi_k] along u_k.

    This is the shape of a discrete tail measure on R^d (linear scaling)
    cut by sets that are unions of radial intervals along each ray.
    """

    alpha: float
    directions: np.ndarray
    weights: np.ndarray
    r_lo: np.ndarray
    r_hi: np.ndarray

    def __len__(self):
        return self.weights.shape[0]

    def _radial(self, lo, hi):
        a = self.alpha
        lo = np.maximum(lo, self.r_lo)
        hi = np.minimum(hi, self.r_hi)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            m = lo ** (-a) - np.where(np.isinf(hi), 0.0, hi ** (-a))
        return np.where(hi > lo, m, 0.0)

    @property
    def total(self):
        return float(np.sum(self.weights * self._radial(0.0, np.inf)))

    def box_mass(self, lo, hi):
        """Mass of prod_j (lo_j, hi_j]."""
        return float(np.sum(self.box_terms(lo, hi)))

    def box_terms(self, lo, hi):
        """Per-segment contributions to the mass of prod_j (lo_j, hi_j]."""
        U = self.directions
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if U.shape[1] != lo.size or lo.size != hi.size:
            raise DimensionMismatch("box and measure dimensions differ")
        r0 = np.zeros(len(self))
        r1 = np.full(len(self), np.inf)
        for j in range(U.shape[1]):
            u = U[:, j]
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                a = np.where(u > 0, lo[j] / u, hi[j] / u)
                b = np.where(u > 0, hi[j] / u, lo[j] / u)
            zero = u == 0
            ok = (lo[j] < 0) & (hi[j] >= 0)
            a = np.where(zero, np.where(ok, 0.0, np.inf), a)
            b = np.where(zero, np.where(ok, np.inf, 0.0), b)
            r0 = np.maximum(r0, np.nan_to_num(a, nan=np.inf))
            r1 = np.minimum(r1, np.nan_to_num(b, nan=0.0))
        r0 = np.maximum(r0, 0.0)
        return self.weights * self._radial(r0, r1)

    def permuted(self, perm):
        return RaySegments(self.alpha, self.directions[:, perm], self.weights, self.r_lo, self.r_hi)

    def to_json(self):
        return {
            "alpha": self.alpha,
            "segments": [
                {"direction": u.tolist(), "weight": float(w), "r_lo": float(a), "r_hi": _num(b)}
                for u, w, a, b in zip(self.directions, self.weights, self.r_lo, self.r_hi)
            ],
        }


def _num(x):
    return "inf" if math.isinf(x) else float(x)


def _vector_atoms(mu: TailMeasure):
    if not isinstance(mu.scaling, Linear):
        raise DimensionMismatch("marginal assembly needs vectors under linear scaling")
    locs = mu.spectral.locations
    if not all(isinstance(u, Vector) for u in locs):
        raise DimensionMismatch("marginal assembly needs vector atoms")
    dims = {u.dim for u in locs}
    if len(dims) != 1:
        raise DimensionMismatch("atoms of different dimensions")
    return np.array([u.values for u in locs]), mu.spectral.weights


def as_ray_segments(mu: TailMeasure) -> RaySegments:
    U, w = _vector_atoms(mu)
    k = w.size
    return RaySegments(mu.alpha, U, w, np.zeros(k), np.full(k, np.inf))


def assemble_from_marginals(parts, a: float, order=None) -> RaySegments:
    """Assemble mu on {max_i |x_i| > a} from measures mu_i known on {|x_i| > eps}.

    Term i is mu_i restricted to {|x_i| > a, max_{j before i} |x_j| <= a},
    where "before" follows ``order`` (default 1, ..., d).  ``parts[i]`` is a
    :class:`TailMeasure` on R^d or a :class:`RaySegments` for coordinate i+1.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    d = len(parts)
    segs = [p if isinstance(p, RaySegments) else as_ray_segments(p) for p in parts]
    if any(s.directions.shape[1] != d for s in segs):
        raise DimensionMismatch(f"{d} parts need atoms in R^{d}")
    alphas = {s.alpha for s in segs}
    if len(alphas) != 1:
        raise DimensionMismatch("parts have different tail indices")
    order = list(range(d)) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(d)):
        raise ValueError("order must be a permutation of the coordinates")
    out_u, out_w, out_lo, out_hi = [], [], [], []
    for pos, i in enumerate(order):
        s = segs[i]
        U = np.abs(s.directions)
        ui = U[:, i]
        earlier = order[:pos]
        prev = U[:, earlier].max(axis=1) if earlier else np.zeros(len(s))
        with np.errstate(divide="ignore", over="ignore"):
            lo = np.maximum(s.r_lo, np.where(ui > 0, a / ui, np.inf))
            hi = np.minimum(s.r_hi, np.where(prev > 0, a / prev, np.inf))
        keep = hi > lo
        out_u.append(s.directions[keep])
        out_w.append(s.weights[keep])
        out_lo.append(lo[keep])
        out_hi.append(hi[keep])
    return RaySegments(
        alphas.pop(),
        np.concatenate(out_u),
        np.concatenate(out_w),
        np.concatenate(out_lo),
        np.concatenate(out_hi),
    )
