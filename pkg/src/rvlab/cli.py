"""Experiment runner: TOML configs in, deterministic JSON and CSV reports out.

Exit codes: 0 success, 2 invalid config (the message names the key),
3 statistical precondition failure such as too few exceedances.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, limits, parallel, samplers
from .core import Element, Vector
from .errors import ConfigError, RVLabError, StatisticalPreconditionError
from .estimators import (
    _values,
    conditional_limit_test,
    empirical_marginal_part,
    empirical_spectral,
    estimate_tail_index,
    function_rv_diagnostic,
    hidden_rv_ladder,
    tail_process_estimate,
)
from .grammar import parse
from .moduli import Modulus, PositiveLinear, parse_modulus
from .rng import Stream
from .tailmeasure import RaySegments, SpectralMeasure, TailMeasure, assemble_from_marginals, change_modulus, sector_mass

CSV_COLUMNS = ("level", "statistic", "value", "stderr")
CSV_SCHEMA = "rvlab-trace/1"


# -- config access ---------------------------------------------------------

_MISSING = object()


class Section:
    """Typed, key-tracking view of a config table; errors name the full key."""

    def __init__(self, table, prefix=""):
        self.table = table
        self.prefix = prefix

    def key(self, k):
        return f"{self.prefix}{k}"

    def has(self, k):
        return k in self.table

    def get(self, k, kind=None, default=_MISSING):
        if k not in self.table:
            if default is _MISSING:
                raise ConfigError(self.key(k), "required key is missing")
            return default
        v = self.table[k]
        if kind is not None:
            try:
                v = kind(v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(self.key(k), f"cannot read {v!r}: {exc}") from None
        return v

    def floats(self, k, default=_MISSING):
        return self.get(k, lambda v: [_float(x) for x in v], default)

    def ints(self, k, default=_MISSING):
        return self.get(k, lambda v: [int(x) for x in v], default)

    def sub(self, k, default=_MISSING):
        v = self.get(k, default=default)
        if v is None:
            return None
        if not isinstance(v, dict):
            raise ConfigError(self.key(k), "expected a table")
        return Section(v, self.key(k) + ".")

    def positive_int(self, k, default=_MISSING):
        v = self.get(k, int, default)
        if v is not None and v < 1:
            raise ConfigError(self.key(k), f"must be >= 1, got {v}")
        return v

    def modulus(self, k, default=_MISSING):
        text = self.get(k, str, default)
        if text is None:
            return None
        return _guard(self.key(k), parse_modulus, text)


def _float(x):
    if isinstance(x, str) and x.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    return float(x)


def _guard(key, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (RVLabError, ValueError, TypeError, KeyError) as exc:
        if isinstance(exc, StatisticalPreconditionError):
            raise
        raise ConfigError(key, str(exc)) from None


# -- generators ------------------------------------------------------------

_SIMPLE_GENERATORS = {
    "pareto": samplers.Pareto,
    "weibull_tail": samplers.WeibullTail,
    "log_pareto": samplers.LogPareto,
    "pareto_pair": samplers.ParetoPairIID,
    "pareto_vector": samplers.ParetoVector,
    "dombry_ribatet": samplers.DombryRibatet,
    "scaling_min": samplers.ScalingMin,
    "broken_line": samplers.BrokenLine,
    "random_polynomial": samplers.RandomPolynomial,
    "spike": samplers.SpikeFunction,
    "exchangeable_pareto_seq": samplers.ExchangeableParetoSeq,
    "moving_max": samplers.StationaryMovingMax,
    "random_ball": samplers.RandomBall,
    "ellipsoid": samplers.Ellipsoid,
}
_NESTED = {
    "binomial_pp": (samplers.BinomialPP, ("points",)),
    "poisson_pp": (samplers.PoissonPP, ("points",)),
    "marked_pp": (samplers.MarkedPP, ("ground", "marks")),
    "shot_noise": (samplers.ShotNoise, ("process",)),
    "convex_hull": (samplers.ConvexHullOfPoints, ("points",)),
}
GENERATOR_KINDS = sorted([*_SIMPLE_GENERATORS, *_NESTED, "spectral_rv"])


def _tuples(params):
    return {k: tuple(v) if isinstance(v, list) else v for k, v in params.items()}


def tail_measure_from_config(sec: Section) -> TailMeasure:
    alpha = sec.get("alpha", float)
    ref = sec.modulus("reference", default="norm(2)")
    atoms_cfg = sec.get("atoms")
    if not isinstance(atoms_cfg, list) or not atoms_cfg:
        raise ConfigError(sec.key("atoms"), "expected a nonempty list of {location, weight} tables")
    atoms = []
    for j, a in enumerate(atoms_cfg):
        s = Section(a, sec.key(f"atoms[{j}]."))
        atoms.append((_guard(s.key("location"), Vector, s.floats("location")), s.get("weight", float)))
    sm = _guard(sec.key("atoms"), SpectralMeasure, atoms, ref)
    return _guard(sec.key("alpha"), TailMeasure, alpha, sm)


def generator_from_config(sec: Section):
    kind = sec.get("kind", str)
    params = {k: v for k, v in sec.table.items() if k != "kind"}
    if kind in _SIMPLE_GENERATORS:
        return _guard(sec.key("kind"), _SIMPLE_GENERATORS[kind], **_tuples(params))
    if kind in _NESTED:
        cls, nested = _NESTED[kind]
        for name in nested:
            if name in params:
                params[name] = generator_from_config(sec.sub(name))
        return _guard(sec.key("kind"), cls, **_tuples(params))
    if kind == "spectral_rv":
        return samplers.SpectralRV(tail_measure_from_config(sec))
    raise ConfigError(sec.key("kind"), f"unknown generator {kind!r}; known: {', '.join(GENERATOR_KINDS)}")


def eta_from_config(sec: Section):
    kind = sec.get("kind", str)
    params = {k: v for k, v in sec.table.items() if k != "kind"}
    table = {"constant": samplers.ConstantLaw, "lln": samplers.LLNSum, "clt": samplers.CLTSum}
    if kind not in table:
        raise ConfigError(sec.key("kind"), f"unknown eta family {kind!r}")
    return _guard(sec.key("kind"), table[kind], **_tuples(params))


def _draw(gen, seed, n, start=0):
    if gen.vector_valued:
        return samplers.sample_array(gen, seed, n, start)
    return samplers.sample(gen, seed, n, start)


# -- closed-form survival functions of the Pareto pair ---------------------


def _surv_min(t, beta):
    return t**-2.0


def _surv_beta_plus(t, beta):
    return (t**-2.0 + 2 * beta * t ** (-1 / beta)) / (1 - 2 * beta)


def _surv_beta_minus(t, beta):
    return (t**-2.0 - 2 * beta * t ** (-1 / beta)) / (1 - 2 * beta)


def _surv_beta_star_plus(t, beta):
    return ((2 - 2 * beta) * t ** (-1 / (1 - beta)) + t**-2.0) / (1 - 2 * beta)


def _surv_beta_star_minus(t, beta):
    return ((2 - 2 * beta) * t ** (-1 / (1 - beta)) - t**-2.0) / (1 - 2 * beta)


def _surv_half(t, beta):
    return t**-2.0 * (1 + 2 * math.log(t))


def _surv_max(t, beta):
    return 2 / t - t**-2.0


SURVIVAL_FORMS = {
    "min": _surv_min,
    "max": _surv_max,
    "beta_plus": _surv_beta_plus,
    "beta_minus": _surv_beta_minus,
    "beta_star_plus": _surv_beta_star_plus,
    "beta_star_minus": _surv_beta_star_minus,
    "half": _surv_half,
}


# -- analyses --------------------------------------------------------------
#
# Each analysis takes (cfg, seed) and returns (result, rows), rows being
# (level, statistic, value, stderr) tuples for the CSV trace.


def _verdict_rows(verdicts, level_key=None):
    rows = []
    for v in verdicts:
        level = v.extra.get(level_key, "") if level_key else ""
        rows.append((level, v.claim, v.estimate, v.tolerance / limits.Z if v.tolerance else 0.0))
    return rows


def _ratio_verdict(claim, est, target, rtol, **extra):
    tol = rtol * abs(target)
    return limits.Verdict(claim, float(est), float(target), float(tol), bool(abs(est - target) <= tol),
                          extra=extra)


def an_tail_index(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    n = cfg.positive_int("n")
    tau = cfg.modulus("modulus")
    k = cfg.get("k", int, None)
    X = _draw(gen, seed, n)
    r = _guard("modulus", _values, tau, X)
    alpha, se = estimate_tail_index(r[r > 0], k)
    res = {"alpha_hat": alpha, "stderr": se, "k": k, "n": n}
    verdicts = []
    if cfg.has("target_alpha"):
        verdicts.append(limits.verdict("Hill index", alpha, cfg.get("target_alpha", float), se))
        res["verdicts"] = verdicts
    return res, [("", "alpha_hat", alpha, se)]


def an_spectral(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    if not isinstance(gen, samplers.SpectralRV) or gen.dim is None:
        raise ConfigError("generator.kind", "spectral analysis needs a vector-valued spectral_rv generator")
    n = cfg.positive_int("n")
    tau = cfg.modulus("modulus", default=gen.tail.reference.describe())
    q = cfg.get("quantile", float, 0.999)
    X = samplers.sample_array(gen, seed, n)
    r = tau.batch(X)
    thr = float(np.quantile(r, q))
    est = empirical_spectral(X, tau, gen.tail.scaling, thr)
    k = len(est.atoms)
    locs = np.array([u.values for u in gen.tail.spectral.locations])
    true_w = np.array(gen.tail.spectral.weights) / gen.tail.spectral.total
    D = np.array([u.values for u in est.locations])
    nearest = np.argmin(((D[:, None, :] - locs[None, :, :]) ** 2).sum(axis=2), axis=1)
    w_hat = np.bincount(nearest, minlength=len(locs)) / k
    verdicts = []
    for j, (wh, wt) in enumerate(zip(w_hat, true_w)):
        se = math.sqrt(wt * (1 - wt) / k)
        verdicts.append(limits.verdict(f"spectral weight of atom {j + 1}", wh, wt, se, atom=j + 1))
    alpha, ase = estimate_tail_index(r[r > 0], cfg.get("k", int, None))
    verdicts.append(limits.verdict("Hill index", alpha, gen.tail.alpha, ase))
    res = {"threshold": thr, "n_exceedances": k, "weights": w_hat.tolist(), "alpha_hat": alpha,
           "alpha_stderr": ase, "verdicts": verdicts}
    return res, _verdict_rows(verdicts, "atom")


def an_hidden_ladder(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    n = cfg.positive_int("n")
    ladder_txt = cfg.get("ladder", list)
    ladder = [_guard(f"ladder[{j}]", parse_modulus, s) for j, s in enumerate(ladder_txt)]
    if not ladder:
        raise ConfigError("ladder", "ladder must be nonempty")
    X = _draw(gen, seed, n)
    entries = hidden_rv_ladder(X, ladder, k=cfg.get("k", int, None), z=cfg.get("z", float, 3.0))
    verdicts = []
    if cfg.has("targets"):
        targets = cfg.floats("targets")
        if len(targets) != len(ladder):
            raise ConfigError("targets", "one target per ladder entry")
        rtol = cfg.get("rtol", float, 0.07)
        for e, tg in zip(entries, targets):
            verdicts.append(_ratio_verdict(f"tail index of {e.modulus.describe()}", e.alpha_hat, tg, rtol))
    rows = [(e.modulus.describe(), "alpha_hat", e.alpha_hat, e.stderr) for e in entries]
    rows += [(e.modulus.describe(), "log_power", e.log_power, e.log_power_stderr) for e in entries]
    return {"entries": entries, "verdicts": verdicts}, rows


def an_survival(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    n = cfg.positive_int("n")
    t_ladder = cfg.floats("t_ladder")
    probes = cfg.get("probe", list)
    X = _draw(gen, seed, n)
    verdicts = []
    for j, p in enumerate(probes):
        s = Section(p, f"probe[{j}].")
        tau = s.modulus("modulus")
        form = s.get("form", str)
        if form not in SURVIVAL_FORMS:
            raise ConfigError(s.key("form"), f"unknown closed form {form!r}")
        beta = s.get("beta", float, 0.0)
        r = _guard(s.key("modulus"), _values, tau, X)
        for t in t_ladder:
            target = SURVIVAL_FORMS[form](t, beta)
            p_hat = float(np.mean(r > t))
            se = math.sqrt(max(target * (1 - target), 0.0) / n)
            verdicts.append(limits.verdict(f"P({tau.describe()} > t) = {form}", p_hat, target, se,
                                           t=t, modulus=tau.describe(), form=form))
    rows = [(v.extra["t"], f"{v.extra['modulus']}|{v.extra['form']}", v.estimate, v.tolerance / limits.Z)
            for v in verdicts]
    return {"verdicts": verdicts}, rows


def an_conditional_limit(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    n = cfg.positive_int("n")
    tau = cfg.modulus("tau")
    ell = cfg.modulus("ell")
    t_ladder = cfg.floats("t_ladder")
    a_levels = cfg.floats("probe_levels")
    X = _draw(gen, seed, n)
    probes = {f"ell>{a:g}": None for a in a_levels}
    out = conditional_limit_test(X, tau, ell, t_ladder, probes, alpha=cfg.get("alpha", float, None))
    verdicts, rows = [], []
    target_index = cfg.get("ratio_index", float, None)
    for lv in out["levels"]:
        for name, p in lv.probes.items():
            rows.append((lv.t, name, p, lv.stderr[name]))
            if target_index is not None:
                a = float(name[4:])
                verdicts.append(limits.verdict(f"P(ell > {a:g} t | ell > t) = a^-{target_index:g}", p,
                                               a ** (-target_index), lv.stderr[name], t=lv.t, a=a))
    out["verdicts"] = verdicts
    return out, rows


def an_tail_process(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    n = cfg.positive_int("n")
    V = _guard("generator", samplers.sample_values, gen, seed, n)
    table = tail_process_estimate(V, cfg.floats("t_ladder"), cfg.ints("lags"), cfg.floats("levels", (0.5, 1.0, 2.0)))
    verdicts = []
    if hasattr(gen, "tail_process_exceedance"):
        t_max = max(row["t"] for row in table)
        absV = np.abs(V)
        for row in table:
            if row["t"] == t_max:
                tg = gen.tail_process_exceedance(row["lag"], row["level"])
                se = max(row["stderr"], 1.0 / row["n_exceedances"])
                # coincidences of non-extremal values add about P(|X| > a t) at finite t
                slack = float(np.mean(absV > row["level"] * row["t"]))
                est = row["prob"]
                tol = limits.Z * se + slack
                verdicts.append(limits.Verdict(
                    f"P(|X_h| > a t | |X_0| > t), h={row['lag']}, a={row['level']:g}", est, tg, tol,
                    abs(est - tg) <= tol, se, {"finite_t_slack": slack}))
    rows = [(row["t"], f"lag={row['lag']};level={row['level']:g}", row["prob"], row["stderr"]) for row in table]
    return {"table": table, "verdicts": verdicts}, rows


def an_function_diag(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    n = cfg.positive_int("n")
    V = _guard("generator", samplers.sample_values, gen, seed, n)
    alpha = cfg.get("alpha", float, getattr(gen, "alpha", 1.0))
    grids = cfg.get("gamma_grids", list)
    out = function_rv_diagnostic(V, grids, cfg.floats("eps_ladder"), cfg.get("delta", float),
                                 cfg.floats("t_ladder"), lambda t: t**alpha, cfg.get("k", int, None))
    rows = [(f"grid{j}", "alpha_hat", f["alpha_hat"], f["stderr"]) for j, f in enumerate(out["fidis"])]
    rows += [(r["t"], f"osc eps={r['eps']:g}", r["value"], r["stderr"]) for r in out["oscillation"]]
    return out, rows


def _mda_spec(cfg):
    return _guard("family", limits.MdaSpec, cfg.get("family", str), cfg.get("alpha", float, 1.0),
                  cfg.get("endpoint", float, 0.0), cfg.get("norming", str, "closed"), cfg.get("c", float, 1.0))


def an_mda(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    spec = _mda_spec(cfg)
    rows_v = _guard("generator", limits.mda_check, gen, spec, cfg.ints("n_ladder"), cfg.positive_int("reps"),
                    seed, cfg.floats("probes", None))
    out = {"verdicts": rows_v}
    if cfg.has("rate_reps"):
        out["rate"] = limits.mda_rate_check(gen, spec, cfg.ints("n_ladder")[-1], cfg.ints("rate_reps"), seed,
                                            cfg.floats("probes", None))
    rows = [(f"n={v.extra['n']}", f"cdf x={v.extra['x']:g}", v.estimate, v.tolerance / limits.Z) for v in rows_v]
    return out, rows


def an_void_prob(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    vs = _guard("generator", limits.void_probability_check, gen, cfg.floats("levels"), cfg.ints("n_ladder"),
                cfg.positive_int("reps"), seed, cfg.get("norming", str, "closed"))
    rows = [(f"n={v.extra['n']}", f"void s={v.extra['s']:g}", v.estimate, v.tolerance / limits.Z) for v in vs]
    return {"verdicts": vs}, rows


def an_poisson_counts(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    sets = cfg.get("sets", lambda v: [(_float(a), _float(b)) for a, b in v])
    tol = cfg.get("tv_tol", float, 0.01)
    out = _guard("generator", limits.poisson_limit_counts, gen, sets, cfg.positive_int("n"),
                 cfg.positive_int("reps"), seed, cfg.get("norming", str, "closed"), tv_tol=tol)
    verdicts = [
        limits.Verdict(f"TV(count law on {s['set']}, Poisson) <= {tol:g}", s["tv"], 0.0, tol, s["pass"])
        for s in out["sets"]
    ]
    out["verdicts"] = verdicts
    rows = []
    for s in out["sets"]:
        lvl = f"({s['set'][0]:g},{s['set'][1]:g}]"
        rows += [(lvl, f"P(N={j})", p, math.sqrt(p * (1 - p) / out["reps"])) for j, p in enumerate(s["empirical"])]
        rows.append((lvl, "tv", s["tv"], 0.0))
    return out, rows


def an_breiman(cfg, seed):
    xi = _guard("xi_alpha", samplers.Pareto, cfg.get("xi_alpha", float, 1.0))
    eta = eta_from_config(cfg.sub("eta"))
    out = limits.breiman_verify(xi, eta, cfg.floats("t_ladder"), seed, n=cfg.positive_int("n"),
                                delta=cfg.get("delta", float, 0.5), scale=cfg.get("scale", float, 1.0),
                                w_samples=cfg.get("w_samples", int, 10**6), k=cfg.get("k", int, None))
    verdicts = []
    if cfg.get("check_constant", bool, True):
        verdicts += [lv["constant"] for lv in out["levels"]]
    if cfg.has("target_index"):
        ti = out["tail_index"]
        verdicts.append(_ratio_verdict("tail index of Y", ti["alpha_hat"], cfg.get("target_index", float),
                                       cfg.get("index_rtol", float, 0.07)))
    out["verdicts"] = verdicts
    rows = [(lv["t"], "t^alpha P(|Y|>t)", lv["constant"].estimate, lv["constant"].stderr) for lv in out["levels"]]
    rows += [(lv["t"], "positive share", lv["positive_share"].estimate, lv["positive_share"].stderr)
             for lv in out["levels"]]
    rows.append(("", "alpha_hat", out["tail_index"]["alpha_hat"], out["tail_index"]["stderr"]))
    return out, rows


def an_janossy(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    power = cfg.get("g_power", float, getattr(getattr(gen, "points", None), "alpha", 1.0))
    out = _guard("generator", limits.janossy_rv_check, gen, cfg.get("base", float, 1.0), cfg.floats("probe_levels"),
                 cfg.floats("t_ladder"), lambda t: t**power, seed, n=cfg.positive_int("n"))
    rows = []
    for lv in out["levels"]:
        rows += [(lv["t"], f"J1 a={p.extra['a']:g}", p.estimate, p.stderr) for p in lv["probes"]]
        rows.append((lv["t"], "two point", lv["two_point"], lv["two_point_stderr"]))
    out["verdicts"] = [p for lv in out["levels"][-1:] for p in lv["probes"]]
    return out, rows


def an_set_pipeline(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    n = cfg.positive_int("n")
    functionals = tuple(cfg.get("functionals", list, list(limits.FUNCTIONALS[:5])))
    sets = samplers.sample(gen, seed, n)
    report, _ = _guard("functionals", limits.set_functional_pipeline, sets, functionals, cfg.get("k", int, None))
    out = {"functionals": report, "verdicts": []}
    if "steiner_containment" in report:
        c = report["steiner_containment"]
        out["verdicts"].append(limits.Verdict("Steiner point lies in K", c["outside"], 0.0, 0.0, c["pass"]))
    if isinstance(gen, samplers.ConvexHullOfPoints) and isinstance(gen.points, samplers.ParetoPairIID) \
            and cfg.has("steiner_t_ladder"):
        a = gen.points.alpha
        hull = limits.hull_steiner_check(gen, seed, cfg.get("steiner_n", int, n), cfg.floats("steiner_t_ladder"),
                                         lambda r: 2.0 * r ** (-a))
        out["steiner_levels"] = hull["levels"]
        out["steiner_alpha"] = hull["steiner_alpha"]
        out["verdicts"] += hull["levels"]
    rows = [(f, "alpha_hat", e.get("alpha_hat", float("nan")), e.get("stderr", float("nan")))
            for f, e in report.items() if f != "steiner_containment"]
    return out, rows


def _random_tail_measure(stream, d, m, alpha):
    U = stream.child("atoms").uniform_matrix(0, m, d)
    U = U / U.max(axis=1, keepdims=True)
    w = 0.2 + stream.child("weights").uniform(0, m)
    ref = parse_modulus("max_abs")
    return TailMeasure(alpha, SpectralMeasure([(Vector(u), float(x)) for u, x in zip(U, w)], ref))


def an_change_modulus(cfg, seed):
    d = cfg.positive_int("dim", 3)
    m = cfg.positive_int("atoms", 3)
    alpha = cfg.get("alpha", float, 1.0)
    n = cfg.positive_int("n")
    root = Stream(seed, "change_modulus")
    mu = _random_tail_measure(root, d, m, alpha)
    ell = PositiveLinear(tuple(0.1 + root.child("ell").uniform(0, d)))
    nu = change_modulus(mu, ell)
    lhs = sector_mass(nu, lambda u: True, 1.0)
    rhs = float(sum(w * ell(u) ** alpha for u, w in mu.spectral.atoms))
    verdicts = [limits.Verdict("sector mass of change_modulus over (1, inf) = sum w l(u)^alpha", lhs, rhs,
                               1e-12 * max(1.0, abs(rhs)), abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs)))]
    gen = samplers.SpectralRV(mu)
    r, idx = gen._parts(samplers.root_stream(seed, gen), 0, n)
    U = np.array([u.values for u in mu.spectral.locations])
    ell_u = U @ np.array(ell.weights)
    lv = r * ell_u[idx]
    total = mu.spectral.total
    share_target = np.array([w * ell(u) ** alpha for u, w in mu.spectral.atoms]) / rhs
    rows = []
    for t in cfg.floats("t_ladder"):
        hit = lv > t
        p = float(np.mean(hit))
        est = t**alpha * p * total
        se = t**alpha * total * math.sqrt(max(p * (1 - p), 1.0 / n) / n)
        verdicts.append(limits.verdict(f"t^alpha P(l(xi) > t) sigma(S) at t={t:g}", est, rhs, se, t=t))
        rows.append((t, "tail constant", est, se))
        k = int(hit.sum())
        shares = np.bincount(idx[hit], minlength=m) / max(k, 1)
        for j in range(m):
            s_se = math.sqrt(share_target[j] * (1 - share_target[j]) / max(k, 1))
            verdicts.append(limits.verdict(f"conditional share of atom {j + 1} at t={t:g}", shares[j],
                                           share_target[j], s_se, t=t, atom=j + 1))
            rows.append((t, f"share atom {j + 1}", float(shares[j]), s_se))
    return {"measure": mu, "ell": ell, "changed": nu, "identity": [lhs, rhs], "verdicts": verdicts}, rows


def an_assembly(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    if not gen.vector_valued:
        raise ConfigError("generator.kind", "assembly needs a vector-valued generator")
    n = cfg.positive_int("n")
    t = cfg.get("t", float)
    a = cfg.get("a", float, 1.0)
    alpha = cfg.get("alpha", float, getattr(gen, "alpha", 1.0))
    boxes = cfg.get("boxes", lambda v: [([_float(x) for x in lo], [_float(x) for x in hi]) for lo, hi in v])
    mode = cfg.get("parts", str, "exact" if isinstance(gen, samplers.ParetoPairIID) else "empirical")
    if mode == "exact":
        if not isinstance(gen, samplers.ParetoPairIID):
            raise ConfigError("parts", "exact parts are known for the iid Pareto pair only")
        # mu restricted to {|x_i| > eps} is the ray along e_i with unit weight
        parts = [RaySegments(alpha, np.eye(2)[[i]], np.ones(1), np.zeros(1), np.full(1, np.inf)) for i in range(2)]
    elif mode == "empirical":
        X_parts = samplers.sample_array(gen, seed, n, start=n)
        parts = [empirical_marginal_part(X_parts, i, t, alpha) for i in range(gen.dim)]
    else:
        raise ConfigError("parts", f"expected 'exact' or 'empirical', got {mode!r}")
    assembled = _guard("generator", assemble_from_marginals, parts, a)
    X = samplers.sample_array(gen, seed, n)
    Y = X / t
    g = t**alpha
    verdicts, rows = [], []
    for j, (lo, hi) in enumerate(boxes):
        if len(lo) != gen.dim or len(hi) != gen.dim:
            raise ConfigError(f"boxes[{j}]", f"box corners must have {gen.dim} coordinates")
        terms = assembled.box_terms(lo, hi)
        est = float(terms.sum())
        est_se = float(np.sqrt(np.sum(terms**2)))
        inside = np.all((Y > np.array(lo)) & (Y <= np.array(hi)), axis=1) & (np.abs(Y).max(axis=1) > a)
        p = float(np.mean(inside))
        direct = g * p
        direct_se = g * math.sqrt(max(p * (1 - p), 1.0 / n) / n)
        se = math.hypot(est_se, direct_se)
        verdicts.append(limits.verdict(f"assembled mass of box {j + 1}", est, direct, se, box=j + 1))
        rows.append((f"box{j + 1}", "assembled", est, est_se))
        rows.append((f"box{j + 1}", "direct", direct, direct_se))
    return {"parts": mode, "n_segments": len(assembled), "total": assembled.total, "verdicts": verdicts}, rows


def _digest(arr):
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def an_determinism(cfg, seed):
    gen = generator_from_config(cfg.sub("generator"))
    n = cfg.positive_int("n")
    block = cfg.positive_int("block", 4096)
    workers = cfg.ints("workers", [1, 2, 8])
    stream = samplers.root_stream(seed, gen)
    if gen.vector_valued:
        def draw(lo, hi):
            return gen.draw_array(stream, lo, hi - lo)
    elif hasattr(gen, "values"):
        def draw(lo, hi):
            return gen.values(stream, lo, hi - lo)
    else:
        raise ConfigError("generator.kind", "determinism check needs an array-valued generator")
    reference = _digest(draw(0, n))
    digests = {}
    for w in workers:
        with parallel.workers(w):
            digests[w] = _digest(np.concatenate(parallel.map_blocks(draw, n, block)))
    kernel_ref = None
    kernel = {}
    for w in workers:
        with parallel.workers(w):
            mins, counts = limits.replicate_min_counts(Stream(seed, "determinism"), 2000, 1000, [0.001, 0.01])
        kernel[w] = _digest(np.concatenate([mins, counts.ravel().astype(float)]))
        kernel_ref = kernel_ref or kernel[w]
    same = all(v == reference for v in digests.values()) and len(set(kernel.values())) == 1
    verdicts = [limits.Verdict("identical samples for every worker count", float(same), 1.0, 0.0, same)]
    rows = [(w, "sha256 prefix match", float(digests[w] == reference), 0.0) for w in workers]
    return {"reference": reference, "digests": {str(k): v for k, v in digests.items()},
            "kernel_digests": {str(k): v for k, v in kernel.items()}, "verdicts": verdicts}, rows


ANALYSES = {
    "tail_index": an_tail_index,
    "spectral": an_spectral,
    "hidden_ladder": an_hidden_ladder,
    "survival": an_survival,
    "conditional_limit": an_conditional_limit,
    "tail_process": an_tail_process,
    "function_diag": an_function_diag,
    "mda": an_mda,
    "void_prob": an_void_prob,
    "poisson_counts": an_poisson_counts,
    "breiman": an_breiman,
    "janossy": an_janossy,
    "set_pipeline": an_set_pipeline,
    "change_modulus": an_change_modulus,
    "assembly": an_assembly,
    "determinism": an_determinism,
}


# -- reports ---------------------------------------------------------------


def to_plain(obj):
    """JSON-ready copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(obj, limits.Verdict):
        return to_plain(obj.to_json())
    if hasattr(obj, "to_json") and not isinstance(obj, type):
        return to_plain(obj.to_json())
    if isinstance(obj, Modulus):
        return obj.describe()
    if isinstance(obj, Element):
        return to_plain(obj.to_json())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_plain(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()


def run_config(cfg: dict, seed_override=None):
    """Validate and run one experiment; returns (report, csv_text)."""
    cfg = dict(cfg)
    if seed_override is not None:
        cfg["seed"] = int(seed_override)
    sec = Section(cfg)
    name = sec.get("name", str)
    analysis = sec.get("analysis", str)
    if analysis not in ANALYSES:
        raise ConfigError("analysis", f"unknown analysis {analysis!r}; known: {', '.join(sorted(ANALYSES))}")
    seed = sec.get("seed", int)
    if seed < 0:
        raise ConfigError("seed", "seed must be nonnegative")
    result, rows = ANALYSES[analysis](sec, seed)
    verdicts = result.get("verdicts", []) if isinstance(result, dict) else []
    report = {
        "name": name,
        "analysis": analysis,
        "version": __version__,
        "seed": seed,
        "config_hash": config_hash(cfg),
        "csv_schema": CSV_SCHEMA,
        "all_pass": all(v.passed for v in verdicts) if verdicts else None,
        "result": result,
    }
    return to_plain(report), csv_text(rows)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else ("inf" if v == math.inf else ("-inf" if v == -math.inf else repr(v)))
    return str(v)


def csv_text(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def report_json(report) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


# -- bundled configs -------------------------------------------------------


def _experiments_dir():
    return resources.files("rvlab") / "experiments"


def list_experiments():
    """Names and descriptions of the bundled configs."""
    out = []
    for p in sorted(_experiments_dir().iterdir(), key=lambda p: p.name):
        if p.name.endswith(".toml"):
            cfg = tomllib.loads(p.read_text(encoding="utf-8"))
            out.append((p.name[:-5], cfg.get("description", "")))
    return out


def bundled_config(name):
    p = _experiments_dir() / f"{name}.toml"
    if not p.is_file():
        raise ConfigError("config", f"no bundled experiment named {name!r}")
    return tomllib.loads(p.read_text(encoding="utf-8"))


def load_config(path):
    p = Path(path)
    if not p.exists():
        # a bare name refers to a bundled config
        return bundled_config(str(path))
    try:
        return tomllib.loads(p.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{path}: {exc}") from None


# -- dump-samples ----------------------------------------------------------


def sample_rows(elements):
    """Rows for the sample CSV: the schema depends on the element kind."""
    rows = []
    for i, x in enumerate(elements):
        kind = type(x).__name__
        if kind in ("Vector", "Sequence", "GridFunction"):
            rows.append([i, kind, "", *map(_cell, np.asarray(x.values).ravel())])
        elif kind == "PointConfig":
            pts = np.asarray(x.points).reshape(len(x.points), -1) if len(x.points) else np.zeros((0, 1))
            if not len(pts):
                rows.append([i, kind, ""])
            for j, p in enumerate(pts):
                rows.append([i, kind, j, *map(_cell, p)])
        elif kind == "Polytope":
            for j, v in enumerate(x.vertices):
                rows.append([i, kind, j, *map(_cell, v)])
        else:
            rows.append([i, kind, "", json.dumps(to_plain(x))])
    return rows


def dump_samples(cfg, seed_override=None, count=None):
    sec = Section(cfg)
    gen_sec = sec.sub("generator")
    gen = generator_from_config(gen_sec)
    seed = int(seed_override) if seed_override is not None else sec.get("seed", int)
    count = count or sec.get("dump_n", int, min(sec.get("n", int, 1000), 1000))
    elements = samplers.sample(gen, seed, count)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["element", "kind", "part", "values..."])
    w.writerows(sample_rows(elements))
    return buf.getvalue()


# -- entry point -----------------------------------------------------------


def _parser():
    p = argparse.ArgumentParser(prog="rvlab", description="Regular variation experiment runner")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("run", "run an experiment"), ("validate", "check a config without running it"),
                        ("dump-samples", "write sampled elements as CSV")]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="TOML file or bundled experiment name")
        sp.add_argument("--out-dir", default=".", help="directory for reports")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for sampling")
        sp.add_argument("--seed-override", type=int, default=None)
    sub.add_parser("list", help="list bundled experiments")
    return p


def _validate(cfg, seed_override=None):
    cfg = dict(cfg)
    if seed_override is not None:
        cfg["seed"] = seed_override
    sec = Section(cfg)
    sec.get("name", str)
    analysis = sec.get("analysis", str)
    if analysis not in ANALYSES:
        raise ConfigError("analysis", f"unknown analysis {analysis!r}")
    sec.get("seed", int)
    if sec.has("n"):
        sec.positive_int("n")
    for key in ("generator",):
        if sec.has(key):
            generator_from_config(sec.sub(key))
    for key in ("modulus", "tau", "ell"):
        if sec.has(key):
            sec.modulus(key)
    for j, s in enumerate(sec.get("ladder", list, [])):
        _guard(f"ladder[{j}]", parse_modulus, s)
    if sec.has("eta"):
        eta_from_config(sec.sub("eta"))
    if analysis == "mda":
        _mda_spec(sec)
    if sec.has("scaling"):
        name, args = _guard("scaling", parse, sec.get("scaling", str))
        from .core import scaling_from_name

        _guard("scaling", scaling_from_name, name, args)
    return True


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            for name, desc in list_experiments():
                print(f"{name}\t{desc}")
            return 0
        cfg = load_config(args.config)
        if args.command == "validate":
            _validate(cfg, args.seed_override)
            print("ok")
            return 0
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        name = Section(cfg).get("name", str)
        if args.command == "dump-samples":
            with parallel.workers(max(1, args.threads)):
                text = dump_samples(cfg, args.seed_override)
            (out / f"{name}_samples.csv").write_text(text, encoding="utf-8", newline="")
            return 0
        with parallel.workers(max(1, args.threads)):
            report, trace = run_config(cfg, args.seed_override)
        (out / f"{name}.json").write_text(report_json(report), encoding="utf-8")
        (out / f"{name}.csv").write_text(trace, encoding="utf-8", newline="")
        status = report["all_pass"]
        print(f"{name}: {'pass' if status else ('no verdicts' if status is None else 'FAIL')}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StatisticalPreconditionError as exc:
        print(f"statistical precondition failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
