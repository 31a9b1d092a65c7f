"""Tail-index and tail-measure estimation from samples.

Samples are either lists of elements or, for vectors, (n, d) arrays; the
array path is what the large Monte Carlo runs use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import kernels
from .core import (
    Element,
    GridFunction,
    Linear,
    ScalingSpec,
    Vector,
    apply_scaling,
    apply_scaling_array,
    invert_scaling,
)
from .errors import (
    InfiniteModulus,
    InsufficientData,
    InsufficientExceedances,
    ZeroModulus,
)
from .moduli import Modulus, Oscillation, snap_window
from .tailmeasure import RaySegments, SpectralMeasure

MIN_EXCEEDANCES = 50


@dataclass
class PolarSample:
    direction: Element
    radius: float


def polar_decompose(tau: Modulus, s: ScalingSpec, x: Element) -> PolarSample:
    """(T_{1/tau(x)} x, tau(x))."""
    r = tau(x)
    if r == 0:
        raise ZeroModulus("polar decomposition needs tau(x) > 0")
    if not math.isfinite(r):
        raise InfiniteModulus("polar decomposition needs tau(x) < inf")
    return PolarSample(invert_scaling(s, r, x), r)


def polar_decompose_array(tau: Modulus, s: ScalingSpec, X):
    """Directions and radii of the rows of X; rows with tau = 0 are an error."""
    r = tau.batch(X)
    if np.any(r == 0):
        raise ZeroModulus("some rows have tau(x) = 0")
    if not np.all(np.isfinite(r)):
        raise InfiniteModulus("some rows have infinite tau")
    return apply_scaling_array(s, 1.0 / r, X), r


def default_k(n):
    return int(math.floor(n**0.7))


def estimate_tail_index(radii, k=None):
    """Hill estimator over the k largest radii: (alpha_hat, alpha_hat / sqrt(k))."""
    x = np.asarray(radii, dtype=float)
    n = x.size
    if k is None:
        k = default_k(n)
    k = int(k)
    if not 2 <= k < n:
        raise InsufficientData(f"need 2 <= k < n, got k={k}, n={n}")
    if np.any(~(x > 0)):
        raise InsufficientData("radii must be positive")
    top = -np.partition(-x, k)[: k + 1]
    top = np.sort(top)[::-1]
    s = kernels.hill_log_sum(top, k)
    if not s > 0:
        raise InsufficientData("zero log-spacings: the top order statistics are tied")
    alpha = k / s
    return alpha, alpha / math.sqrt(k)


@dataclass
class EstimatorReport:
    alpha_hat: float
    alpha_stderr: float
    threshold_used: float
    n_exceedances: int
    spectral_atoms: SpectralMeasure | None
    diagnostics: list = field(default_factory=list)
    seed: int | None = None
    n: int = 0

    def to_json(self):
        return {
            "alpha_hat": self.alpha_hat,
            "alpha_stderr": self.alpha_stderr,
            "threshold_used": self.threshold_used,
            "n_exceedances": self.n_exceedances,
            "spectral_atoms": None
            if self.spectral_atoms is None
            else [
                {"location": u.to_json(), "weight": w} for u, w in self.spectral_atoms.atoms
            ],
            "diagnostics": [[k, v] for k, v in self.diagnostics],
            "seed": self.seed,
            "n": self.n,
        }


def _values(tau, samples):
    if isinstance(samples, np.ndarray):
        return tau.batch(samples)
    return np.array([tau(x) for x in samples])


def default_threshold(radii, k=None):
    """(1 - k/n) empirical quantile of the radii, k = floor(n**0.7) by default."""
    r = np.sort(np.asarray(radii, dtype=float))
    n = r.size
    k = default_k(n) if k is None else int(k)
    if not 1 <= k < n:
        raise InsufficientData(f"need 1 <= k < n, got k={k}, n={n}")
    return float(r[n - k - 1])


def empirical_spectral(samples, tau: Modulus, s: ScalingSpec, threshold: float):
    """Directions of the exceedances tau(x) > threshold, each with weight 1/k."""
    r = _values(tau, samples)
    idx = np.nonzero(r > threshold)[0]
    k = idx.size
    if k < MIN_EXCEEDANCES:
        raise InsufficientExceedances(
            f"{k} samples exceed the threshold {threshold}; at least {MIN_EXCEEDANCES} needed"
        )
    if isinstance(samples, np.ndarray):
        D = apply_scaling_array(s, 1.0 / r[idx], samples[idx])
        locs = [Vector(d) for d in D]
    else:
        locs = [invert_scaling(s, r[i], samples[i]) for i in idx]
    return SpectralMeasure([(u, 1.0 / k) for u in locs], tau, check=False)


def spectral_weights(spectral: SpectralMeasure, groups):
    """Total weight of atoms in each named group: {name: predicate on location}."""
    return {
        name: float(sum(w for u, w in spectral.atoms if pred(u))) for name, pred in groups.items()
    }


def empirical_tail_mass(samples, set_indicator, t: float, g_of_t: float, s: ScalingSpec = None):
    """g(t) * (1/n) * #{i : T_{1/t} xi_i in B}."""
    s = Linear() if s is None else s
    if not g_of_t > 0:
        raise ValueError("g(t) must be positive")
    if isinstance(samples, np.ndarray):
        hits = np.asarray(set_indicator(apply_scaling_array(s, 1.0 / t, samples)), dtype=bool)
        n = samples.shape[0]
        count = int(np.count_nonzero(hits))
    else:
        n = len(samples)
        count = sum(bool(set_indicator(invert_scaling(s, t, x))) for x in samples)
    return g_of_t * count / n


def empirical_tail_mass_stderr(samples_n, mass, g_of_t):
    p = mass / g_of_t
    return g_of_t * math.sqrt(max(p * (1.0 - p), 0.0) / samples_n)


# -- slowly varying corrections --------------------------------------------


def fit_log_correction(radii, threshold):
    """Fit S(t) = C t**-a (log t)**b to the exceedances of ``threshold``.

    Maximises the conditional likelihood of the exceedances, whose density
    given X > u is x**(-a-1) (log x)**(b-1) (a log x - b) / S(u) up to C.
    Returns (a, b, stderr_a, stderr_b) with stderr from the observed
    information.
    """
    x = np.asarray(radii, dtype=float)
    x = x[x > threshold]
    if x.size < MIN_EXCEEDANCES or threshold <= 1.0:
        raise InsufficientExceedances("too few exceedances (or threshold <= 1) for the log fit")
    lx = np.log(x)
    llx = np.log(lx)
    lu, llu = math.log(threshold), math.log(math.log(threshold))
    k = x.size

    def nll(theta):
        a, b = theta
        g = a * lx - b
        if a <= 0 or np.any(g <= 0):
            return 1e300
        ll = np.sum(-(a + 1.0) * lx + (b - 1.0) * llx + np.log(g))
        return -(ll + k * (a * lu - b * llu))

    a0 = k / float(np.sum(lx - lu))
    res = optimize.minimize(
        nll, x0=[a0, 0.0], method="Nelder-Mead",
        options={"xatol": 1e-9, "fatol": 1e-9, "maxiter": 4000},
    )
    theta = res.x
    h = np.array([1e-3, 1e-2])
    H = np.zeros((2, 2))
    eye = np.eye(2)
    for i in range(2):
        for j in range(2):
            ei, ej = eye[i] * h[i], eye[j] * h[j]
            H[i, j] = (
                nll(theta + ei + ej) - nll(theta + ei - ej) - nll(theta - ei + ej) + nll(theta - ei - ej)
            ) / (4 * h[i] * h[j])
    try:
        se = np.sqrt(np.maximum(np.diag(np.linalg.inv(H)), 0.0))
    except np.linalg.LinAlgError:
        se = np.array([np.nan, np.nan])
    return float(theta[0]), float(theta[1]), float(se[0]), float(se[1])


@dataclass
class LadderEntry:
    modulus: Modulus
    alpha_hat: float
    stderr: float
    comment: str
    log_index: float = float("nan")
    log_power: float = float("nan")
    log_power_stderr: float = float("nan")
    log_corrected: bool = False

    def to_json(self):
        return {
            "modulus": self.modulus.describe(),
            "alpha_hat": self.alpha_hat,
            "stderr": self.stderr,
            "comment": self.comment,
            "log_index": self.log_index,
            "log_power": self.log_power,
            "log_power_stderr": self.log_power_stderr,
            "log_corrected": self.log_corrected,
        }


def hidden_rv_ladder(samples, ladder, thresholds=None, k=None, z=3.0):
    """Tail index of tau(xi) for each modulus of the ladder.

    The first modulus is the reference.  Each later entry is classified as
    ``same`` (within z combined stderr of the reference), ``hidden``
    (strictly larger index) or ``not_rv`` (smaller, which a sub-ideal
    cannot produce).  ``thresholds`` (one per modulus) override the
    default k-th order statistic; a slowly varying log factor is flagged
    when its fitted power exceeds z stderr.
    """
    ladder = list(ladder)
    if not ladder:
        raise ValueError("ladder must be nonempty")
    out = []
    ref = None
    for j, tau in enumerate(ladder):
        r = _values(tau, samples)
        pos = r[r > 0]
        if thresholds is not None and thresholds[j] is not None:
            kk = int(np.count_nonzero(pos > thresholds[j]))
        else:
            kk = default_k(r.size) if k is None else int(k)
        kk = min(kk, pos.size - 1)
        alpha, se = estimate_tail_index(pos, kk)
        thr = float(np.sort(pos)[pos.size - kk - 1])
        try:
            a_log, b, _, se_b = fit_log_correction(pos, thr)
        except InsufficientExceedances:
            a_log, b, se_b = float("nan"), float("nan"), float("nan")
        flagged = bool(se_b > 0 and b > z * se_b)
        if ref is None:
            ref = (alpha, se)
            comment = "reference"
        else:
            diff = alpha - ref[0]
            tol = z * math.hypot(se, ref[1])
            comment = "same" if abs(diff) <= tol else ("hidden" if diff > 0 else "not_rv")
        if flagged:
            comment += "; log correction"
        out.append(LadderEntry(tau, alpha, se, comment, a_log, b, se_b, flagged))
    return out


# -- conditional limits ----------------------------------------------------


@dataclass
class ConditionalLevel:
    t: float
    n_exceedances: int
    probes: dict
    stderr: dict
    implied_index: dict
    distance_to_previous: float | None


def conditional_limit_test(samples, tau: Modulus, ell: Modulus, t_ladder, probe_sets,
                           s: ScalingSpec = None, alpha=None, z=4.0):
    """Empirical law of T_{1/t} xi given ell(xi) > t on probe sets, per level t.

    ``probe_sets`` maps names to predicates on scaled samples.  Names of the
    form ``"ell>a"`` are exceedance ratios P{ell(xi) > a t | ell(xi) > t};
    for them the implied index -log(ratio)/log(a) is reported, and compared
    with ``alpha`` (default: Hill estimate of tau(xi)) to flag an index
    mismatch.
    """
    s = Linear() if s is None else s
    lv = _values(ell, samples)
    alpha_se = 0.0
    if alpha is None:
        r = _values(tau, samples)
        alpha, alpha_se = estimate_tail_index(r[r > 0])
    levels = []
    prev = None
    mismatch = False
    for t in t_ladder:
        idx = np.nonzero(lv > t)[0]
        k = idx.size
        if k < MIN_EXCEEDANCES:
            raise InsufficientExceedances(f"{k} exceedances of ell at level t={t}")
        if isinstance(samples, np.ndarray):
            scaled = apply_scaling_array(s, np.full(k, 1.0 / t), samples[idx])
        else:
            scaled = [invert_scaling(s, t, samples[i]) for i in idx]
        probes, errs, implied = {}, {}, {}
        for name, pred in probe_sets.items():
            if name.startswith("ell>"):
                a = float(name[4:])
                hit = lv[idx] > a * t
            elif isinstance(scaled, np.ndarray):
                hit = np.asarray(pred(scaled), dtype=bool)
            else:
                hit = np.array([bool(pred(x)) for x in scaled])
            p = float(np.mean(hit))
            probes[name] = p
            errs[name] = math.sqrt(max(p * (1 - p), 1.0 / k) / k)
            if name.startswith("ell>") and 0 < p < 1:
                a = float(name[4:])
                implied[name] = -math.log(p) / math.log(a)
                se_implied = errs[name] / (p * math.log(a))
                if abs(implied[name] - alpha) > z * math.hypot(se_implied, alpha_se):
                    mismatch = True
        dist = None if prev is None else max(abs(probes[n] - prev[n]) for n in probes)
        levels.append(ConditionalLevel(float(t), int(k), probes, errs, implied, dist))
        prev = probes
    return {"alpha_reference": float(alpha), "levels": levels, "index_mismatch": mismatch}


# -- tail process ----------------------------------------------------------


def tail_process_estimate(samples, t_ladder, lags, levels=(0.5, 1.0, 2.0)):
    """P{|xi_h| > a t | |xi_0| > t} for each t, lag h and level a.

    Every position i of every sequence with i - min(lags) and i + max(lags)
    inside the sequence serves as time 0 (stationarity).
    """
    if isinstance(samples, np.ndarray):
        V = np.abs(samples)
    else:
        m = min(x.truncation for x in samples)
        V = np.abs(np.array([x.values[:m] for x in samples]))
    lags = [int(h) for h in lags]
    L = V.shape[1]
    lo, hi = max(0, -min(lags)), L - max(0, max(lags))
    if hi <= lo:
        raise InsufficientData("sequences are too short for the requested lags")
    table = []
    for t in t_ladder:
        centre = V[:, lo:hi]
        hit = centre > t
        k = int(np.count_nonzero(hit))
        if k < MIN_EXCEEDANCES:
            raise InsufficientExceedances(f"{k} exceedances at level t={t}")
        for h in lags:
            other = V[:, lo + h : hi + h][hit]
            for a in levels:
                p = float(np.mean(other > a * t))
                table.append(
                    {
                        "t": float(t),
                        "lag": h,
                        "level": float(a),
                        "prob": p,
                        "stderr": math.sqrt(max(p * (1 - p), 0.0) / k),
                        "n_exceedances": k,
                    }
                )
    return table


# -- functional diagnostic -------------------------------------------------


def _grid_values(samples):
    if isinstance(samples, np.ndarray):
        return samples, 0.0, 1.0
    a, b = samples[0].a, samples[0].b
    return np.array([x.values for x in samples]), a, b


def function_rv_diagnostic(samples, gamma_grids, eps_ladder, delta, t_ladder, g, k=None):
    """Finite-dimensional tail indices and the oscillation tightness term.

    (i) for each grid gamma, the Hill index of max_u |xi(u)| over u in gamma;
    (ii) g(t) P{w_eps(xi) > t delta} for each (eps, t).  Condition (ii)
    holds when, at every t, the estimates do not increase as eps decreases
    and the smallest eps gives at most half of the largest (or both are 0).
    """
    V, a, b = _grid_values(samples)
    G = V.shape[1]
    u = np.linspace(a, b, G)
    step = (b - a) / (G - 1)
    fidis = []
    for gamma in gamma_grids:
        pos = (np.asarray(gamma, dtype=float) - a) / step
        i = np.clip(np.floor(pos).astype(int), 0, G - 2)
        frac = pos - i
        cols = V[:, i] * (1.0 - frac) + V[:, i + 1] * frac
        r = np.abs(cols).max(axis=1)
        r = r[r > 0]
        kk = None if k is None else min(k, r.size - 1)
        alpha, se = estimate_tail_index(r, kk)
        fidis.append({"grid": list(map(float, gamma)), "alpha_hat": alpha, "stderr": se})
    eps_sorted = sorted(eps_ladder, reverse=True)
    osc = {}
    for eps in eps_sorted:
        w = snap_window(eps, step)
        osc[eps] = kernels.sliding_range(V, w)
    n = V.shape[0]
    rows, decays = [], True
    for t in t_ladder:
        vals = []
        for eps in eps_sorted:
            p = float(np.mean(osc[eps] > t * delta))
            val = g(t) * p
            vals.append(val)
            rows.append(
                {
                    "eps": float(eps),
                    "t": float(t),
                    "value": val,
                    "stderr": g(t) * math.sqrt(max(p * (1 - p), 0.0) / n),
                }
            )
        monotone = all(vals[i + 1] <= vals[i] * (1 + 1e-9) + 1e-12 for i in range(len(vals) - 1))
        shrinks = vals[-1] <= 0.5 * vals[0] or vals[0] == 0.0
        decays = decays and monotone and shrinks
    return {"fidis": fidis, "oscillation": rows, "condition_ii": decays}


# -- marginal parts --------------------------------------------------------


def empirical_marginal_part(X, i, t, alpha):
    """Ray measure estimating mu restricted to {|x_i| > eps} from exceedances |X_i| > t.

    Each exceedance contributes the ray through X / |X_i| with weight
    t**alpha / n, so the mass of {|x_i| > 1} is t**alpha P{|X_i| > t}.
    ``i`` is 0-based.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    a = np.abs(X[:, i])
    idx = np.nonzero(a > t)[0]
    if idx.size < MIN_EXCEEDANCES:
        raise InsufficientExceedances(f"{idx.size} exceedances of coordinate {i + 1} at t={t}")
    U = X[idx] / a[idx, None]
    k = idx.size
    w = np.full(k, t**alpha / n)
    return RaySegments(float(alpha), U, w, np.zeros(k), np.full(k, np.inf))
