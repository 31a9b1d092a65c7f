"""Monte Carlo verifiers for limit theorems.

Scalar laws that are decreasing transforms of a uniform are handled by the
replicate kernel: the maximum of n draws is a function of the minimum of n
uniforms, and the number of draws above c is the number of uniforms below
P{X > c}.  Replicates are cut into fixed blocks and merged in order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import geometry, kernels, parallel
from .core import AffineInverse, Linear, LogShift, Polytope, ScalingSpec, apply_scaling
from .errors import BadNormingRule, BadParameters, DegeneratePolytope, MomentDiagnosticFailed
from .estimators import estimate_tail_index
from .rng import Stream
from .samplers import (
    BinomialPP,
    ConvexHullOfPoints,
    EtaFamily,
    Pareto,
    PoissonPP,
    UniformTransform,
    sample_pair_with_covariate,
)

Z = 4.0

# draws per replicate block; about 32 MB of uniforms in the numpy fallback
_BLOCK_DRAWS = 1 << 22


@dataclass
class Verdict:
    claim: str
    estimate: float
    target: float
    tolerance: float
    passed: bool
    stderr: float = float("nan")
    extra: dict = field(default_factory=dict)

    def to_json(self):
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


def verdict(claim, estimate, target, stderr, z=Z, **extra):
    tol = z * stderr
    return Verdict(claim, float(estimate), float(target), float(tol),
                   bool(abs(estimate - target) <= tol), float(stderr), extra)


# -- replicate kernel ------------------------------------------------------


def replicate_min_counts(stream: Stream, reps: int, n: int, u_thresholds=()):
    """Minimum of n uniforms and cumulative counts below sorted thresholds, per replicate."""
    thr = np.asarray(u_thresholds, dtype=float)
    if thr.size and np.any(np.diff(thr) < 0):
        raise ValueError("thresholds must be ascending")
    per = max(1, _BLOCK_DRAWS // max(n, 1))
    key = stream.key
    parts = parallel.map_blocks(lambda lo, hi: kernels.block_min_counts(key, lo, hi - lo, n, thr), reps, per)
    mins = np.concatenate([p[0] for p in parts])
    counts = np.concatenate([p[1] for p in parts]) if thr.size else np.zeros((reps, 0), dtype=np.int64)
    return mins, counts


# -- maximum domains of attraction ----------------------------------------


@dataclass(frozen=True)
class MdaSpec:
    """Extreme-value family with its transform scaling and norming rule.

    Frechet uses linear scaling, Weibull the affine-inverse scaling about
    the endpoint, Gumbel the log-shift scaling.  ``norming`` is ``closed``
    (a_n from the exact survival function) or ``empirical`` (the
    (1 - 1/n) quantile of a pilot sample).
    """

    family: str
    alpha: float = 1.0
    endpoint: float = 0.0
    norming: str = "closed"
    c: float = 1.0

    def __post_init__(self):
        if self.family not in ("frechet", "weibull", "gumbel"):
            raise BadParameters(f"unknown family {self.family!r}")
        if not self.alpha > 0:
            raise BadParameters("alpha must be positive")
        if self.norming not in ("closed", "empirical"):
            raise BadNormingRule(f"unknown norming rule {self.norming!r}")

    @property
    def transform(self) -> ScalingSpec:
        return {
            "frechet": Linear(),
            "weibull": AffineInverse(self.endpoint),
            "gumbel": LogShift(),
        }[self.family]

    @property
    def unit(self):
        """Point mapped to the (1 - 1/n) quantile by T_{a_n}."""
        return {"frechet": 1.0, "weibull": self.endpoint - 1.0, "gumbel": 0.0}[self.family]

    def target_cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "frechet":
            with np.errstate(divide="ignore"):
                return np.where(x > 0, np.exp(-self.c * np.power(np.maximum(x, 1e-300), -self.alpha)), 0.0)
        if self.family == "weibull":
            y = self.endpoint - x
            return np.where(y > 0, np.exp(-np.power(np.maximum(y, 0.0), self.alpha)), 1.0)
        return np.exp(-np.exp(-self.alpha * x))

    def a_from_quantile(self, q):
        if self.family == "frechet":
            a = q
        elif self.family == "weibull":
            a = 1.0 / (self.endpoint - q) if q < self.endpoint else math.inf
        else:
            a = math.exp(q)
        if not (a > 0 and math.isfinite(a)):
            raise BadNormingRule(f"quantile {q} gives no valid a_n")
        return a

    def threshold(self, a_n, x):
        """Original-scale level T_{a_n} x."""
        return self.transform.act_array(a_n, np.asarray(x, dtype=float)[:, None])[:, 0]


def norming_constant(gen: UniformTransform, spec: MdaSpec, n: int, seed=0, pilot=None):
    if not isinstance(gen, UniformTransform):
        raise BadNormingRule("norming needs a scalar law with a known survival function")
    if spec.norming == "closed":
        q = gen.quantile(1.0 - 1.0 / n)
    else:
        m = int(pilot or min(max(10**4 * n, 10**6), 2 * 10**7))
        x = gen.draw_array(Stream(seed, "pilot", gen.name, n), 0, m)[:, 0]
        q = float(np.quantile(x, 1.0 - 1.0 / n))
    return spec.a_from_quantile(q)


DEFAULT_PROBES = {"frechet": (0.5, 1.0, 2.0), "weibull": (-2.0, -1.0, -0.5), "gumbel": (-1.0, 0.0, 1.0)}


def mda_check(gen: UniformTransform, spec: MdaSpec, n_ladder, reps, seed, probes=None, z=Z):
    """Empirical CDF of T_{1/a_n} max(X_1..X_n) over ``reps`` replicates against the limit law.

    Weibull probes are points x = endpoint - y, so P{a_n(max - a) <= -y} is
    the CDF at x.
    """
    if not isinstance(gen, UniformTransform):
        raise BadParameters("mda_check needs a scalar uniform-transform law")
    if probes is None:
        probes = np.asarray(DEFAULT_PROBES[spec.family], dtype=float)
        if spec.family == "weibull":
            probes = probes + spec.endpoint
    probes = np.asarray(probes, dtype=float)
    rows = []
    for n in n_ladder:
        n = int(n)
        a_n = norming_constant(gen, spec, n, seed)
        levels = spec.threshold(a_n, probes)
        u_thr = gen.survival(levels)
        mins, _ = replicate_min_counts(Stream(seed, "mda", gen.name, n), reps, n)
        target = spec.target_cdf(probes)
        for x, q, tg in zip(probes, u_thr, target):
            p = float(np.mean(mins >= q))
            se = math.sqrt(max(tg * (1 - tg), 1e-300) / reps)
            v = verdict(f"P{{T(1/a_n) max <= {x:g}}} -> limit CDF", p, tg, se, z, n=n, x=float(x), a_n=a_n)
            rows.append(v)
    return rows


def mda_rate_check(gen, spec, n, reps_levels, seed, probes=None, z=Z):
    """Sup deviation from the limit CDF at increasing replicate counts.

    Each deviation must stay below z * max stderr, which scales as 1/sqrt(reps).
    """
    out = []
    for reps in reps_levels:
        rows = mda_check(gen, spec, [n], reps, seed + reps, probes, z)
        dev = max(abs(r.estimate - r.target) for r in rows)
        bound = max(r.tolerance for r in rows)
        out.append({"reps": int(reps), "sup_deviation": dev, "bound": bound, "pass": dev <= bound})
    return out


# -- void probabilities and counts ----------------------------------------


def void_probability_check(gen: UniformTransform, levels, n_ladder, reps, seed, norming="closed",
                           mu=None, z=Z):
    """Frequency of {no point of a_n^{-1}{X_1..X_n} in (s, inf)} against exp(-mu((s, inf))).

    ``mu(s)`` defaults to s**-alpha for a Pareto(alpha) law.
    """
    if mu is None:
        if not isinstance(gen, Pareto):
            raise BadParameters("pass mu for laws other than Pareto")
        mu = lambda s: s ** (-gen.alpha)  # noqa: E731
    spec = MdaSpec("frechet", getattr(gen, "alpha", 1.0), norming=norming)
    rows = []
    for n in n_ladder:
        n = int(n)
        a_n = norming_constant(gen, spec, n, seed)
        mins, _ = replicate_min_counts(Stream(seed, "void", gen.name, n), reps, n)
        for s in levels:
            q = float(gen.survival(a_n * s))
            p = float(np.mean(mins >= q))
            tg = math.exp(-mu(s))
            se = math.sqrt(max(tg * (1 - tg), 1.0 / reps) / reps)
            rows.append(verdict(f"void probability of ({s:g}, inf) -> exp(-mu)", p, tg, se, z, n=n, s=float(s)))
    return rows


def poisson_limit_counts(gen: UniformTransform, sets, n, reps, seed, norming="closed", mu=None,
                         kmax=10, tv_tol=0.01):
    """Counts of a_n^{-1}{X_1..X_n} in disjoint intervals (lo, hi] against Poisson(mu).

    Returns, per set, the empirical law on 0..kmax, the Poisson law, their
    total-variation distance, and the empirical covariance matrix of the
    counts.
    """
    if mu is None:
        if not isinstance(gen, Pareto):
            raise BadParameters("pass mu for laws other than Pareto")
        a = gen.alpha
        mu = lambda lo, hi: lo ** (-a) - (0.0 if math.isinf(hi) else hi ** (-a))  # noqa: E731
    sets = [(float(lo), float(hi)) for lo, hi in sets]
    spec = MdaSpec("frechet", getattr(gen, "alpha", 1.0), norming=norming)
    a_n = norming_constant(gen, spec, int(n), seed)
    ends = sorted({e for s in sets for e in s if math.isfinite(e)})
    u_thr = np.array([float(gen.survival(a_n * e)) for e in ends])
    order = np.argsort(u_thr)
    _, cum = replicate_min_counts(Stream(seed, "counts", gen.name, int(n)), reps, int(n), u_thr[order])
    above = {}
    for pos, idx in enumerate(order):
        above[ends[idx]] = cum[:, pos]
    zero = np.zeros(reps, dtype=np.int64)
    N = np.stack([above[lo] - (zero if math.isinf(hi) else above[hi]) for lo, hi in sets], axis=1)
    out = []
    for j, (lo, hi) in enumerate(sets):
        lam = mu(lo, hi)
        emp = np.bincount(np.minimum(N[:, j], kmax + 1), minlength=kmax + 2)[: kmax + 1] / reps
        pois = stats.poisson.pmf(np.arange(kmax + 1), lam)
        tv = 0.5 * float(np.sum(np.abs(emp - pois)))
        out.append({
            "set": [lo, hi],
            "mu": lam,
            "empirical": emp.tolist(),
            "poisson": pois.tolist(),
            "tv": tv,
            "pass": tv <= tv_tol,
        })
    cov = np.cov(N.T.astype(float)) if N.shape[1] > 1 else np.var(N[:, 0].astype(float))
    return {"sets": out, "covariance": np.atleast_2d(cov).tolist(), "n": int(n), "reps": int(reps), "a_n": a_n}


# -- Breiman ---------------------------------------------------------------


def _moment(stream, eta_family, x, power, m):
    return float(np.mean(np.abs(eta_family.draw(stream, np.full(m, x))) ** power))


def breiman_verify(xi: Pareto, eta_family: EtaFamily, t_ladder, seed, n=10**6, delta=0.5,
                   probe_x=(1.0, 10.0, 100.0, 1e3, 1e4), moment_samples=10**4, w_samples=10**6,
                   scale=1.0, c=1.0, k=None, z=Z):
    """Tail constant and spectral law of Y = xi * scale * eta_xi.

    Compares t**alpha P{|Y| > t} with c E|W|**alpha (W the limit of eta_x,
    drawn directly) at each t, the share of positive exceedances with
    E[|W|**alpha 1{W > 0}] / E|W|**alpha, and reports the Hill index of
    |Y|.  A moment proxy sup_x E|eta_x|**(alpha + delta) is evaluated at
    ``probe_x``; growth across the probes issues MomentDiagnosticFailed.
    """
    if not isinstance(xi, Pareto):
        raise BadParameters("xi must be Pareto")
    alpha = xi.alpha
    root = Stream(seed, "breiman")
    x, eta = sample_pair_with_covariate(xi, eta_family, seed, n, array=True)
    Y = x * scale * eta
    absY = np.abs(Y)

    W = scale * eta_family.limit(root.child("W"), w_samples)
    wa = np.abs(W) ** alpha
    target = c * float(np.mean(wa))
    target_se = c * float(np.std(wa)) / math.sqrt(w_samples)
    pos_share = float(np.mean(wa * (W > 0))) / float(np.mean(wa)) if np.mean(wa) > 0 else float("nan")

    moments = [
        _moment(root.child("moment", i), eta_family, px, alpha + delta, moment_samples)
        for i, px in enumerate(probe_x)
    ]
    finite = all(math.isfinite(m) for m in moments)
    ok = finite and max(moments) <= 10.0 * max(moments[0], 1e-300)
    if not ok:
        warnings.warn(
            f"moment proxy E|eta_x|^(alpha+delta) grows over the probes: {moments}",
            MomentDiagnosticFailed,
        )

    levels = []
    for t in t_ladder:
        p = float(np.mean(absY > t))
        est = t**alpha * p
        se = math.hypot(t**alpha * math.sqrt(max(p * (1 - p), 0.0) / n), target_se)
        exc = absY > t
        share = float(np.mean(Y[exc] > 0)) if exc.any() else float("nan")
        share_se = math.sqrt(max(pos_share * (1 - pos_share), 0.0) / max(int(exc.sum()), 1))
        levels.append({
            "t": float(t),
            "constant": verdict(f"t^alpha P(|Y| > t) -> c E|W|^alpha at t={t:g}", est, target, se, z),
            "positive_share": verdict("spectral mass of +1", share, pos_share, share_se, z),
        })
    absY_pos = absY[absY > 0]
    alpha_hat, alpha_se = estimate_tail_index(absY_pos, k)
    return {
        "alpha": alpha,
        "target_constant": target,
        "target_stderr": target_se,
        "levels": levels,
        "tail_index": {"alpha_hat": alpha_hat, "stderr": alpha_se},
        "moments": {"probe_x": list(map(float, probe_x)), "values": moments, "pass": ok},
    }


# -- Janossy ---------------------------------------------------------------


def _flat_points(pp, seed, n):
    stream = Stream(seed, "janossy", pp.name)
    if isinstance(pp, BinomialPP):
        X = pp.point_array(stream, 0, n)
        return np.full(n, pp.m), X.reshape(n * pp.m, -1)
    if isinstance(pp, PoissonPP):
        return pp._point_rows(stream, 0, n)
    raise BadParameters("janossy_rv_check needs a binomial or Poisson process")


def janossy_rv_check(pp, base, probe_levels, t_ladder, g, seed, n=10**6, z=Z):
    """First Janossy measure and two-point term on T_t B with B = (base, inf).

    For each t: g(t) E[1{x in T_t A}; eta(T_t B) = 1] for A = (a, inf), a in
    ``probe_levels``, against the limit intensity mass, and the two-point
    term g(t) P{eta(T_t B) >= 2}, which must decay.  Levels where
    P{eta(T_t B) = 1} is estimated as 0 are skipped and recorded.
    """
    if pp.points.dim != 1 or not isinstance(pp.points, Pareto):
        raise BadParameters("janossy_rv_check supports scalar Pareto points")
    alpha = pp.points.alpha
    mult = pp.m if isinstance(pp, BinomialPP) else pp.total
    counts, rows = _flat_points(pp, seed, n)
    owner = np.repeat(np.arange(n), counts)
    x = np.abs(rows[:, 0])
    levels, skipped = [], []
    two_point = []
    for t in t_ladder:
        inB = x > base * t
        nB = np.bincount(owner[inB], minlength=n)
        single = nB == 1
        if not single.any():
            skipped.append(float(t))
            continue
        # the single point of each configuration with exactly one point in T_t B
        pick = inB & single[owner]
        pt = np.zeros(n)
        pt[owner[pick]] = x[pick]
        gt = g(t)
        entry = {"t": float(t), "probes": []}
        for a in probe_levels:
            hit = single & (pt > max(a, base) * t)
            p = float(np.mean(hit))
            est = gt * p
            se = gt * math.sqrt(max(p * (1 - p), 1.0 / n) / n)
            tg = mult * max(a, base) ** (-alpha)
            entry["probes"].append(verdict(f"Janossy mass of ({a:g}, inf)", est, tg, se, z, a=float(a)))
        p2 = float(np.mean(nB >= 2))
        entry["two_point"] = gt * p2
        entry["two_point_stderr"] = gt * math.sqrt(max(p2 * (1 - p2), 0.0) / n)
        two_point.append(gt * p2)
        levels.append(entry)
    if isinstance(pp, BinomialPP) and pp.m == 1:
        decays = all(v == 0.0 for v in two_point)
    else:
        decays = len(two_point) >= 2 and two_point[-1] <= two_point[0]
    return {"levels": levels, "skipped": skipped, "two_point_decays": bool(decays),
            "limit_multiplicity": mult}


# -- random convex sets ----------------------------------------------------

FUNCTIONALS = ("set_sup", "steiner", "mean_width", "volume_root", "intrinsic_volumes", "inscribed_radius")


def set_functional_values(set_samples, functionals=FUNCTIONALS[:5], n_directions=geometry.DEFAULT_DIRECTIONS):
    """Values of the chosen functionals on each planar polytope."""
    unknown = set(functionals) - set(FUNCTIONALS)
    if unknown:
        raise BadParameters(f"unknown functionals {sorted(unknown)}")
    out = {f: [] for f in functionals}
    if "steiner" in functionals:
        out["steiner_point"] = []
    if "intrinsic_volumes" in functionals:
        out["v1"] = []
        out["v2"] = []
    for K in set_samples:
        if not isinstance(K, Polytope) or K.dim != 2:
            raise BadParameters("set functionals are implemented for planar polytopes")
        v = K.vertices
        if "set_sup" in functionals:
            out["set_sup"].append(geometry.sup_norm(v))
        if "steiner" in functionals:
            s = geometry.steiner_point(v, n_directions)
            out["steiner_point"].append(s)
            out["steiner"].append(float(np.linalg.norm(s)))
        if "mean_width" in functionals:
            out["mean_width"].append(geometry.mean_width(v, n_directions))
        if "volume_root" in functionals:
            out["volume_root"].append(math.sqrt(geometry.area(v)))
        if "intrinsic_volumes" in functionals:
            v1, v2 = 0.5 * geometry.perimeter(v), geometry.area(v)
            out["v1"].append(v1)
            out["v2"].append(v2)
            out["intrinsic_volumes"].append(v1)
        if "inscribed_radius" in functionals:
            if len(v) < 3 or geometry.area(v) == 0.0:
                raise DegeneratePolytope("inscribed radius needs a polygon with interior")
            out["inscribed_radius"].append(geometry.inscribed_radius(v))
    return {k: np.array(vals) for k, vals in out.items()}


def set_functional_pipeline(set_samples, functionals=FUNCTIONALS[:5], k=None,
                            n_directions=geometry.DEFAULT_DIRECTIONS, containment_tol=None):
    """Tail index of each functional and Steiner-point containment.

    ``intrinsic_volumes`` reports V_1 (half the perimeter); ``volume_root``
    is V_2**(1/2).  Containment uses the quadrature Steiner point with a
    tolerance of ``containment_tol`` (default: the quadrature error bound
    2 pi**2/n**2 times the diameter, plus 1e-9).
    """
    vals = set_functional_values(set_samples, functionals, n_directions)
    report = {}
    for f in functionals:
        r = vals[f]
        r = r[r > 0]
        entry = {"n_positive": int(r.size)}
        try:
            a, se = estimate_tail_index(r, k if k is None else min(k, r.size - 1))
            entry.update(alpha_hat=a, stderr=se)
        except Exception as exc:  # recorded, not fatal
            entry.update(alpha_hat=float("nan"), stderr=float("nan"), error=str(exc))
        report[f] = entry
    if "steiner" in functionals:
        bad = 0
        for K, s in zip(set_samples, vals["steiner_point"]):
            diam = 2.0 * geometry.sup_norm(K.vertices - K.vertices.mean(axis=0))
            tol = containment_tol if containment_tol is not None else (
                2.0 * math.pi**2 / n_directions**2 * diam + 1e-9)
            if not geometry.contains(K.vertices, s, tol=tol):
                bad += 1
        report["steiner_containment"] = {"outside": bad, "n": len(set_samples), "pass": bad == 0}
    return report, vals


def hull_steiner_check(gen: ConvexHullOfPoints, seed, n, t_ladder, point_norm_tail, z=Z):
    """Tail of ||s(conv{xi_1..xi_m})|| under normalisation g/m.

    ``point_norm_tail(r)`` is mu({||x|| > r}) for the tail measure of one
    point; the Steiner point has limit mass mu({||x|| > 2}) at level 1
    (pushforward by x -> x/2).  Uses the exact polygon formula for the
    Steiner point.
    """
    stream = Stream(seed, "hull", gen.name)
    pts = gen.point_array(stream, 0, n)
    norms = np.empty(n)
    sups = np.empty(n)
    for i, p in enumerate(pts):
        K = Polytope(p)
        norms[i] = np.linalg.norm(geometry.steiner_point_exact(K.vertices))
        sups[i] = geometry.sup_norm(K.vertices)
    rows = []
    for t in t_ladder:
        p = float(np.mean(norms > t))
        est = t / gen.m * p
        se = t / gen.m * math.sqrt(max(p * (1 - p), 1.0 / n) / n)
        rows.append(verdict(f"(t/m) P(|s(X)| > t) -> mu(|x| > 2) at t={t:g}", est, point_norm_tail(2.0), se, z))
    alpha_hat, se = estimate_tail_index(norms[norms > 0])
    return {"levels": rows, "steiner_alpha": {"alpha_hat": alpha_hat, "stderr": se},
            "steiner_norms": norms, "set_sup": sups}
