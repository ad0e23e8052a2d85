"""Seeded experiments E1 to E7.

An experiment is a trial function run over the cartesian product of its grid
axes, ``trials`` times per grid point. Every trial gets its own sub-seed
derived from the master seed, the experiment id, the grid point (as
``name=value`` strings) and the trial index, so results do not depend on the
order in which trials run or on the number of workers.

Config files are TOML::

    id = "E3"          # required
    trials = 200
    seed = 7
    out = "results/e3" # optional, relative to the config file

    [params]           # scalar knobs
    d = 16

    [grid]             # list-valued knobs; one trial block per combination
    p_v = [3, 4, 5, 6, 7, 8, 9, 10, 11, 12]

    [checks]           # acceptance thresholds
    min_success_at_bound = 0.95

Any knob may appear under ``params`` or under ``grid``; unknown keys are
rejected. Outputs, written to ``out``:

``<id>_trials.csv``
    one row per trial (or per skipped grid point); a failing trial keeps its
    row with ``status = error: ...``.
``<id>_summary.csv``, ``<id>_checks.csv``
    aggregates and pass/fail per acceptance check.
``<id>_config.toml``
    the resolved config.
``plot_<id>.py``
    a standalone matplotlib script over the summary CSV.
``<id>_timing.csv``
    wall-clock seconds per trial, kept apart so the other files are
    byte-identical across reruns.
"""

from __future__ import annotations

import copy
import hashlib
import itertools
import json
import math
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import io
from .bcs import hybrid_bcs
from .bounds import BoundInputs, bounds_table, coherence_tail, ell_bound_hybrid, lowrank_measurement_bound
from .dictlearn import ClusterOptions, CompressiveData, estimate_dictionary, refine_dictionary
from .errors import ConfigError, DomainError
from .evaluate import bcs_success, group_error, match_columns
from .grouping import GROUP_TOL, RANK_TOL, group_from_sketch, numerical_rank, rank_test_fixed
from .lowrank import RecoveryOptions, pairing_trial
from .measurement import GaussianEnsemble, apply, project_all, sample_hybrid
from .model import ProblemDims, coherence, generate_dictionary, synthesize
from .rng import derive_seed, make_rng

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

import tomli_w

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "EXPERIMENTS",
    "default_config",
    "load_config",
    "run_experiment",
    "emit_bounds_table",
    "trial_seed",
]


# --------------------------------------------------------------------------- trials


def _e1_trial(q, seed):
    d, m, k, p_f, tol = q["d"], q["m"], q["k"], q["p_f"], q["tol"]
    rng = make_rng(seed)
    A = generate_dictionary(d, m, derive_seed(seed, "dictionary")).atoms
    F = rng.standard_normal((p_f, d)) / math.sqrt(d)
    S = np.sort(rng.choice(m, k, replace=False))
    Y_true = A[:, S] @ (1.0 - rng.random((k, k + 1)))
    # k+1 columns with distinct random supports; rank k+1 almost surely
    while True:
        X = np.zeros((m, k + 1))
        for j in range(k + 1):
            X[rng.choice(m, k, replace=False), j] = 1.0 - rng.random(k)
        Y_full = A @ X
        if numerical_rank(Y_full, RANK_TOL) == k + 1:
            break
    t = rank_test_fixed(F, F @ Y_true, k, tol)
    f = rank_test_fixed(F, F @ Y_full, k, tol)
    sv_t, sv_f = t.evidence.singular_values, f.evidence.singular_values
    return {
        "true_certified": t.is_rank_k,
        "true_sv_ratio": float(sv_t[k] / sv_t[0]),
        "full_certified": f.is_rank_k,
        "full_sv_ratio": float(sv_f[k] / sv_f[0]),
    }


def _e2_trial(q, seed):
    dims = ProblemDims.balanced(q["d"], q["m"], q["k"], q["ell"])
    inst = synthesize(dims, q["coeff_model"], "balanced", derive_seed(seed, "instance"))
    ens = sample_hybrid(q["p_f"], q["p_v"], dims.d, dims.n, derive_seed(seed, "ensemble"))
    rec = apply(ens, inst.Y)
    g = group_from_sketch(rec.fixed_sketch, dims.k, tol=q["tol"])
    truth = {frozenset(int(j) for j in J) for J in inst.groups().values()}
    return {
        "exact": g.as_sets() == truth,
        "groups": len(g.groups),
        "subsets": len(g.subsets),
        "contaminated": len(g.contaminated),
        "ungrouped": len(g.ungrouped),
    }


def _e3_trial(q, seed):
    opts = RecoveryOptions(max_iters=q["max_iters"], restarts=q["restarts"], tol=q["als_tol"])
    r = pairing_trial(q["d"], q["ell"], q["k"], q["p_v"], make_rng(seed), opts, q["success_tol"])
    return {
        "success": r.success,
        "rel_error": r.rel_error,
        "residual": r.residual,
        "restarts_used": r.restarts_used,
    }


def _e3_check(q):
    if not q["k"] <= q["p_v"] <= q["d"]:
        return f"need k <= p_v <= d, got p_v={q['p_v']}"
    return None


def _e4_trial(q, seed):
    d, m, k = q["d"], q["m"], q["k"]
    dims = ProblemDims.balanced(d, m, k, q["ell"])
    inst = synthesize(dims, q["coeff_model"], "balanced", derive_seed(seed, "instance"))
    ens = sample_hybrid(q["p_f"], q["p_v"], d, dims.n, derive_seed(seed, "ensemble"))
    rec = apply(ens, inst.Y)
    res = hybrid_bcs(ens, rec, k, m, seed=derive_seed(seed, "als"))
    out = {"groups": len(res.grouping.groups), "kept_groups": len(res.recoverable.groups),
           "atoms": 0 if res.atoms is None else res.atoms.shape[1],
           "y_error": math.inf, "dict_max_error": math.inf,
           "y_exact": False, "dict_exact": False, "success": False}
    if res.atoms is None or res.atoms.shape[1] < m or res.coefficients is None:
        return out
    rep = match_columns(res.atoms, inst.A)
    ok = bcs_success(inst, res.Y, rep, q["success_tol"])
    out.update(y_error=group_error(res.Y, inst.Y), dict_max_error=rep.max_error,
               y_exact=ok.y_exact, dict_exact=ok.dict_exact, success=ok.y_exact and ok.dict_exact)
    return out


def _e4_check(q):
    if q["p_f"] <= q["k"]:
        return f"need p_f > k, got p_f={q['p_f']}"
    if q["p_f"] + q["p_v"] > q["d"]:
        return f"need p_f + p_v <= d, got {q['p_f'] + q['p_v']}"
    try:
        ell_bound_hybrid(q["d"], q["k"], q["p_f"] + q["p_v"])
    except DomainError as exc:
        return str(exc)
    return None


def _e5_dictionary(q):
    return generate_dictionary(q["d"], q["m"], derive_seed(q["_master"], "E5", "dictionary")).atoms


def _e5_trial(q, seed):
    A = _e5_dictionary(q)
    F = make_rng(seed).standard_normal((q["p_f"], q["d"]))
    mu, mu_f = coherence(A), coherence(F @ A)
    return {"mu": mu, "mu_f": mu_f, "exceed": mu_f >= mu + q["t"]}


def _e6_trial(q, seed):
    d, m, k, p, ell = q["d"], q["m"], q["k"], q["p"], q["ell"]
    rng = make_rng(seed)
    A = rng.standard_normal((d, m))
    A /= np.linalg.norm(A, axis=0)
    # every sample uses atom 0 plus k - 1 others, with random signs
    others = np.argsort(rng.random((ell, m - 1)), axis=1)[:, : k - 1] + 1
    X = np.zeros((m, ell))
    X[0] = rng.choice([-1.0, 1.0], ell)
    np.put_along_axis(X.T, others, rng.choice([-1.0, 1.0], (ell, k - 1)), axis=1)
    Y = A @ X
    ens = GaussianEnsemble(rng.standard_normal((ell, p, d)) / math.sqrt(d), 1.0 / d, seed)
    Yp = project_all(ens, np.einsum("npd,dn->np", ens.mats, Y))
    _, V = np.linalg.eigh(Y @ Y.T / ell)
    _, W = np.linalg.eigh(Yp @ Yp.T / ell)
    a_hat, a_til = V[:, -1], W[:, -1]
    if a_hat @ a_til < 0:
        a_til = -a_til
    err = float(np.linalg.norm(a_hat - a_til))
    proj = float(np.linalg.norm(np.outer(a_hat, a_hat) - np.outer(a_til, a_til), 2))
    return {
        "error": err,
        "projector_gap": proj,
        "inequality_ok": err <= 2.0 * proj + q["slack"],
        "truth_error": float(min(np.linalg.norm(a_hat - A[:, 0]), np.linalg.norm(a_hat + A[:, 0]))),
    }


def _e6_check(q):
    if not q["k"] <= q["p"] <= q["d"] or q["k"] > q["m"]:
        return "need k <= p <= d and k <= m"
    return None


def _e7_trial(q, seed):
    d, m, k, n = q["d"], q["m"], q["k"], q["n"]
    inst = synthesize(ProblemDims(d, m, k, n), q["coeff_model"], "iid", derive_seed(seed, "instance"))
    tol = q["atom_tol"]
    est = estimate_dictionary(inst.Y, m, k, threshold=q["threshold"], seed=derive_seed(seed, "spectral"))
    spc = match_columns(est.atoms, inst.A)
    ref = refine_dictionary(est, inst.Y, k, seed=derive_seed(seed, "refine"))
    ref_rep = match_columns(ref.atoms, inst.A)
    ens = sample_hybrid(q["p_f"], q["p_v"], d, n, derive_seed(seed, "ensemble"))
    cd = CompressiveData.from_record(ens, apply(ens, inst.Y))
    opts = ClusterOptions(min_common=k + 1, min_cluster=k + 1, coverage=k, max_tries=q["compressive_max_tries"])
    cest = estimate_dictionary(cd, m, k, mode="compressive", threshold=q["threshold"], opts=opts,
                               seed=derive_seed(seed, "compressive"))
    comp = match_columns(cest.atoms, inst.A)
    return {
        "spectral_mean": spc.mean_error,
        "spectral_within": int(np.sum(spc.per_atom_error <= tol)),
        "spectral_shortfall": bool(est.shortfall),
        "refined_mean": ref_rep.mean_error,
        "refined_max": ref_rep.max_error,
        "refine_iterations": ref.iterations,
        "compressive_mean": comp.mean_error,
        "compressive_within": int(np.sum(comp.per_atom_error <= tol)),
        "compressive_edges": cest.graph_edges,
        "ratio": comp.mean_error / spc.mean_error if spc.mean_error > 0 else math.inf,
    }


# --------------------------------------------------------------------------- summaries


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    relation: str  # ">=" or "<="
    passed: bool


def _check(name, value, threshold, relation):
    value = float(value)
    ok = value >= threshold if relation == ">=" else value <= threshold
    return Check(name, value, float(threshold), relation, bool(ok and not math.isnan(value)))


def _ok_rows(block):
    return [r for r in block if r is not None]


def _frac(rows, key, total):
    return sum(bool(r[key]) for r in rows) / total if total else math.nan


def _sum_e1(cfg, blocks):
    cols = ["point", "trials", "failed", "true_certified", "full_certified", "max_true_sv_ratio",
            "min_full_sv_ratio"]
    rows, checks = [], []
    for i, (pt, block) in enumerate(blocks):
        ok = _ok_rows(block)
        rows.append((i, len(block), len(block) - len(ok), sum(r["true_certified"] for r in ok),
                     sum(r["full_certified"] for r in ok),
                     max((r["true_sv_ratio"] for r in ok), default=math.nan),
                     min((r["full_sv_ratio"] for r in ok), default=math.nan)))
        checks.append(_check(f"true_certified_fraction[{i}]", _frac(ok, "true_certified", len(block)),
                             cfg.checks["min_true_fraction"], ">="))
        checks.append(_check(f"full_certified_fraction[{i}]", _frac(ok, "full_certified", len(block)),
                             cfg.checks["max_full_fraction"], "<="))
    return cols, rows, checks


def _sum_success(key):
    def summarize(cfg, blocks):
        cols = ["point", "trials", "failed", "successes", "rate"]
        rows, checks = [], []
        for i, (pt, block) in enumerate(blocks):
            ok = _ok_rows(block)
            rate = _frac(ok, key, len(block))
            rows.append((i, len(block), len(block) - len(ok), sum(bool(r[key]) for r in ok), rate))
            checks.append(_check(f"success_rate[{i}]", rate, cfg.checks["min_success"], ">="))
        return cols, rows, checks
    return summarize


def _sum_e3(cfg, blocks):
    cols = ["p_v", "ell", "trials", "failed", "successes", "rate", "median_rel_error", "bound"]
    rows, checks = [], []
    rates = []
    for pt, block in blocks:
        ok = _ok_rows(block)
        bound = lowrank_measurement_bound(pt["d"], pt["ell"], pt["k"]).per_column
        rate = _frac(ok, "success", len(block))
        med = float(np.median([r["rel_error"] for r in ok])) if ok else math.nan
        rows.append((pt["p_v"], pt["ell"], len(block), len(block) - len(ok),
                     sum(r["success"] for r in ok), rate, med, bound))
        rates.append((pt["p_v"], rate, bound))
    for p_v, rate, bound in rates:
        if p_v == bound:
            checks.append(_check(f"rate_at_bound[p_v={p_v}]", rate, cfg.checks["min_success_at_bound"], ">="))
        if p_v == cfg.checks["low_p_v"]:
            checks.append(_check(f"rate_low[p_v={p_v}]", rate, cfg.checks["max_success_low"], "<="))
    ordered = sorted(rates)
    drop = max((a[1] - b[1] for a, b in zip(ordered, ordered[1:])), default=0.0)
    checks.append(_check("max_rate_drop", drop, cfg.checks["monotone_slack"], "<="))
    return cols, rows, checks


def _sum_e5(cfg, blocks):
    cols = ["p_f", "t", "draws", "failed", "exceed", "frequency", "bound", "informative", "ok"]
    rows, checks = [], []
    for pt, block in blocks:
        ok = _ok_rows(block)
        freq = _frac(ok, "exceed", len(block))
        bound = coherence_tail(pt["p_f"], pt["t"])
        informative = bound < 1
        good = len(ok) == len(block) and (not informative or freq <= bound)
        rows.append((pt["p_f"], pt["t"], len(block), len(block) - len(ok),
                     sum(r["exceed"] for r in ok), freq, bound, informative, good))
        if informative:
            checks.append(_check(f"frequency_minus_bound[p_f={pt['p_f']},t={pt['t']}]",
                                 freq - bound if len(ok) == len(block) else math.nan, 0.0, "<="))
    return cols, rows, checks


def _sum_e6(cfg, blocks):
    cols = ["ell", "trials", "failed", "mean_error", "mean_projector_gap", "violations", "mean_truth_error"]
    rows, checks = [], []
    xs, ys = [], []
    violations = 0
    for pt, block in blocks:
        ok = _ok_rows(block)
        mean_err = float(np.mean([r["error"] for r in ok])) if ok else math.nan
        v = sum(not r["inequality_ok"] for r in ok) + len(block) - len(ok)
        violations += v
        rows.append((pt["ell"], len(block), len(block) - len(ok), mean_err,
                     float(np.mean([r["projector_gap"] for r in ok])) if ok else math.nan, v,
                     float(np.mean([r["truth_error"] for r in ok])) if ok else math.nan))
        xs.append(math.log(pt["ell"]))
        ys.append(math.log(mean_err) if mean_err > 0 else math.nan)
    slope = float(np.polyfit(xs, ys, 1)[0]) if len(xs) >= 2 and np.all(np.isfinite(ys)) else math.nan
    checks.append(_check("slope_lower", slope, cfg.checks["slope_min"], ">="))
    checks.append(_check("slope_upper", slope, cfg.checks["slope_max"], "<="))
    checks.append(_check("inequality_violations", violations, 0, "<="))
    return cols, rows, checks


def _sum_e7(cfg, blocks):
    cols = ["point", "trials", "failed", "spectral_mean", "spectral_within_fraction",
            "refined_success_fraction", "compressive_mean", "max_ratio"]
    rows, checks = [], []
    for i, (pt, block) in enumerate(blocks):
        ok = _ok_rows(block)
        m = pt["m"]
        within = sum(r["spectral_within"] for r in ok) / (m * len(block))
        refined = sum(r["refined_mean"] <= cfg.checks["refine_target"] for r in ok) / len(block)
        ratio = max((r["ratio"] for r in ok), default=math.nan) if len(ok) == len(block) else math.nan
        rows.append((i, len(block), len(block) - len(ok),
                     float(np.mean([r["spectral_mean"] for r in ok])) if ok else math.nan, within, refined,
                     float(np.mean([r["compressive_mean"] for r in ok])) if ok else math.nan, ratio))
        checks.append(_check(f"spectral_within_fraction[{i}]", within, cfg.checks["min_spectral_fraction"], ">="))
        checks.append(_check(f"refined_success_fraction[{i}]", refined, cfg.checks["min_refine_fraction"], ">="))
        checks.append(_check(f"compressive_max_ratio[{i}]", ratio, cfg.checks["max_ratio"], "<="))
    return cols, rows, checks


# --------------------------------------------------------------------------- registry


@dataclass(frozen=True)
class Experiment:
    id: str
    title: str
    trial: Callable
    summarize: Callable
    outputs: tuple[str, ...]
    params: dict
    grid: dict
    trials: int
    checks: dict
    plot: tuple  # (x column, y columns, log-log)
    point_check: Callable | None = None


EXPERIMENTS: dict[str, Experiment] = {
    e.id: e
    for e in [
        Experiment(
            "E1", "rank test on sketches of true and full-rank groups", _e1_trial, _sum_e1,
            ("true_certified", "true_sv_ratio", "full_certified", "full_sv_ratio"),
            dict(d=16, m=6, k=2, tol=RANK_TOL), dict(p_f=[3]), 1000,
            dict(min_true_fraction=1.0, max_full_fraction=0.0),
            ("point", ["true_certified", "full_certified"], False)),
        Experiment(
            "E2", "support grouping from the fixed sketch", _e2_trial, _sum_success("exact"),
            ("exact", "groups", "subsets", "contaminated", "ungrouped"),
            dict(d=16, m=6, k=2, p_f=3, p_v=9, coeff_model="interval", tol=GROUP_TOL), dict(ell=[10]), 200,
            dict(min_success=0.99),
            ("point", ["rate"], False)),
        Experiment(
            "E3", "low-rank recovery phase transition in p_v", _e3_trial, _sum_e3,
            ("success", "rel_error", "residual", "restarts_used"),
            dict(d=16, k=2, ell=10, restarts=20, max_iters=1000, als_tol=1e-10, success_tol=1e-6),
            dict(p_v=list(range(3, 13))), 200,
            dict(min_success_at_bound=0.95, low_p_v=4, max_success_low=0.5, monotone_slack=0.03),
            ("p_v", ["rate"], False), _e3_check),
        Experiment(
            "E4", "end-to-end hybrid blind compressed sensing", _e4_trial, _sum_success("success"),
            ("groups", "kept_groups", "atoms", "y_error", "dict_max_error", "y_exact", "dict_exact", "success"),
            dict(d=16, m=6, k=2, p_f=3, ell=10, coeff_model="interval", success_tol=1e-6),
            dict(p_v=[9]), 100,
            dict(min_success=0.9),
            ("p_v", ["rate"], False), _e4_check),
        Experiment(
            "E5", "coherence of F A against the concentration tail", _e5_trial, _sum_e5,
            ("mu", "mu_f", "exceed"),
            dict(d=256, m=32), dict(p_f=[50, 100, 200], t=[0.2, 0.3, 0.5]), 500,
            {},
            ("p_f", ["frequency", "bound"], False)),
        Experiment(
            "E6", "principal eigenvector from projected samples", _e6_trial, _sum_e6,
            ("error", "projector_gap", "inequality_ok", "truth_error"),
            dict(d=32, p=16, m=64, k=3, slack=1e-10), dict(ell=[250, 500, 1000, 2000, 4000]), 50,
            dict(slope_min=-0.7, slope_max=-0.3),
            ("ell", ["mean_error", "mean_projector_gap"], True), _e6_check),
        Experiment(
            "E7", "dictionary learning, complete against compressive", _e7_trial, _sum_e7,
            ("spectral_mean", "spectral_within", "spectral_shortfall", "refined_mean", "refined_max",
             "refine_iterations", "compressive_mean", "compressive_within", "compressive_edges", "ratio"),
            dict(d=64, m=80, k=3, coeff_model="symmetric", threshold=0.5, p_f=4, p_v=32,
                 atom_tol=0.1, compressive_max_tries=40),
            dict(n=[5000]), 20,
            dict(min_spectral_fraction=0.9, refine_target=1e-4, min_refine_fraction=0.8, max_ratio=2.0),
            ("point", ["spectral_mean", "compressive_mean"], False)),
    ]
}


# --------------------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    id: str
    params: dict
    grid: dict
    trials: int
    seed: int = 0
    checks: dict = field(default_factory=dict)
    out: str | None = None

    @property
    def experiment(self) -> Experiment:
        return EXPERIMENTS[self.id]

    def points(self) -> list[dict]:
        axes = list(self.grid)
        return [dict(zip(axes, combo)) for combo in itertools.product(*(self.grid[a] for a in axes))]

    def to_dict(self) -> dict:
        d = {"id": self.id, "trials": self.trials, "seed": self.seed,
             "params": dict(self.params), "grid": {k: list(v) for k, v in self.grid.items()},
             "checks": dict(self.checks)}
        if self.out is not None:
            d["out"] = self.out
        return d

    def digest(self) -> str:
        body = {k: v for k, v in self.to_dict().items() if k != "out"}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:12]


def default_config(exp_id: str) -> ExperimentConfig:
    key = exp_id.upper()
    if key not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment id {exp_id!r}; known: {', '.join(EXPERIMENTS)}")
    e = EXPERIMENTS[key]
    return ExperimentConfig(key, copy.deepcopy(e.params), copy.deepcopy(e.grid), e.trials, 0,
                            dict(e.checks))


def _coerce(name, value, like):
    if isinstance(like, bool):
        ok = isinstance(value, bool)
    elif isinstance(like, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(like, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    else:
        ok = isinstance(value, type(like))
    if not ok:
        raise ConfigError(f"{name}: expected {type(like).__name__}, got {value!r}")
    return value


_TOP_KEYS = {"id", "trials", "seed", "out", "params", "grid", "checks"}


def config_from_dict(data: dict, base: Path | None = None) -> ExperimentConfig:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "id" not in data:
        raise ConfigError("config needs an 'id'")
    cfg = default_config(str(data["id"]))
    e = cfg.experiment
    knobs = {**e.params, **{k: v[0] for k, v in e.grid.items()}}
    for section in ("params", "grid", "checks"):
        if section in data and not isinstance(data[section], dict):
            raise ConfigError(f"[{section}] must be a table")
    for name, value in data.get("params", {}).items():
        if name not in knobs:
            raise ConfigError(f"unknown parameter {name!r} for {cfg.id}; known: {sorted(knobs)}")
        cfg.params[name] = _coerce(f"params.{name}", value, knobs[name])
        cfg.grid.pop(name, None)
    for name, values in data.get("grid", {}).items():
        if name not in knobs:
            raise ConfigError(f"unknown grid axis {name!r} for {cfg.id}; known: {sorted(knobs)}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid.{name} must be a non-empty list")
        cfg.grid[name] = [_coerce(f"grid.{name}", v, knobs[name]) for v in values]
        cfg.params.pop(name, None)
    for name, value in data.get("checks", {}).items():
        if name not in e.checks:
            raise ConfigError(f"unknown check {name!r} for {cfg.id}; known: {sorted(e.checks)}")
        cfg.checks[name] = _coerce(f"checks.{name}", value, e.checks[name])
    if "trials" in data:
        cfg.trials = _coerce("trials", data["trials"], 1)
    if "seed" in data:
        cfg.seed = _coerce("seed", data["seed"], 1)
    if "out" in data:
        out = Path(str(data["out"]))
        cfg.out = str(out if out.is_absolute() or base is None else base / out)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    if not cfg.grid:
        raise ConfigError("grid must have at least one axis")
    for name, values in cfg.grid.items():
        if not values:
            raise ConfigError(f"grid axis {name!r} is empty")


def load_config(source) -> ExperimentConfig:
    """Load a TOML config file, or the built-in default for an id like ``"E3"``."""
    path = Path(source)
    if not path.exists() and path.suffix != ".toml":
        return default_config(str(source))  # raises on an unknown id
    try:
        data = tomllib.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"no such config file or experiment id: {source}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data, path.parent)


# --------------------------------------------------------------------------- running


def _point_key(point: dict) -> list[str]:
    return [f"{k}={io.format_value(point[k])}" for k in sorted(point)]


def trial_seed(master: int, exp_id: str, point: dict, trial: int) -> int:
    """Sub-seed from (master seed, experiment, grid point, trial index)."""
    return derive_seed(master, exp_id, *_point_key(point), trial)


def _execute(task):
    exp_id, q, seed = task
    t0 = time.perf_counter()
    try:
        out = EXPERIMENTS[exp_id].trial(q, seed)
        status = "ok"
    except Exception as exc:  # crash isolation: record and continue
        out = None
        msg = " ".join(traceback.format_exception_only(type(exc), exc)).strip().replace("\n", " ")
        status = f"error: {msg}"
    return status, out, time.perf_counter() - t0


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trial_columns: list[str]
    trial_rows: list[tuple]
    summary_columns: list[str]
    summary_rows: list[tuple]
    checks: list[Check]
    timing: list[tuple]
    paths: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def run_experiment(cfg: ExperimentConfig, workers: int = 1, out=None) -> ExperimentResult:
    """Run every (grid point, trial); write the outputs when ``out`` (or
    ``cfg.out``) is set."""
    validate(cfg)
    e = cfg.experiment
    axes = list(cfg.grid)
    digest = cfg.digest()
    points = cfg.points()
    tasks, layout, skipped = [], [], {}
    for i, pt in enumerate(points):
        q = {**cfg.params, **pt, "_master": cfg.seed}
        reason = e.point_check(q) if e.point_check else None
        if reason:
            skipped[i] = reason
            continue
        for t in range(cfg.trials):
            s = trial_seed(cfg.seed, cfg.id, pt, t)
            tasks.append((cfg.id, q, s))
            layout.append((i, t, s))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_execute, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        results = [_execute(t) for t in tasks]

    columns = ["config_hash", "point", *axes, "trial", "seed", "status", *e.outputs]
    rows, timing = [], []
    by_point: dict[int, list] = {i: [] for i in range(len(points))}
    res_iter = iter(zip(layout, results))
    pending = next(res_iter, None)
    for i, pt in enumerate(points):
        vals = [pt[a] for a in axes]
        if i in skipped:
            rows.append((digest, i, *vals, "", "", f"skipped: {skipped[i]}", *[""] * len(e.outputs)))
            continue
        while pending is not None and pending[0][0] == i:
            (_, t, s), (status, out_row, secs) = pending
            outs = [""] * len(e.outputs) if out_row is None else [out_row[c] for c in e.outputs]
            rows.append((digest, i, *vals, t, s, status, *outs))
            timing.append((i, t, secs))
            by_point[i].append(out_row)
            pending = next(res_iter, None)
    blocks = [({**cfg.params, **points[i]}, by_point[i]) for i in range(len(points)) if i not in skipped]
    s_cols, s_rows, checks = e.summarize(cfg, blocks) if blocks else ([], [], [])
    result = ExperimentResult(cfg, columns, rows, s_cols, s_rows, checks, timing)
    target = out if out is not None else cfg.out
    if target is not None:
        result.paths = write_outputs(result, Path(target))
    return result


def write_outputs(result: ExperimentResult, out: Path) -> dict:
    cfg = result.config
    low = cfg.id.lower()
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "trials": io.write_csv(out / f"{low}_trials.csv", f"{low}_trials", result.trial_columns, result.trial_rows),
        "summary": io.write_csv(out / f"{low}_summary.csv", f"{low}_summary", result.summary_columns,
                                result.summary_rows),
        "checks": io.write_csv(out / f"{low}_checks.csv", "checks", ["check", "value", "relation", "threshold", "passed"],
                               [(c.name, c.value, c.relation, c.threshold, c.passed) for c in result.checks]),
        "timing": io.write_csv(out / f"{low}_timing.csv", "timing", ["point", "trial", "seconds"], result.timing),
    }
    snap = cfg.to_dict()
    snap.pop("out", None)
    p = out / f"{low}_config.toml"
    p.write_text(tomli_w.dumps(snap))
    paths["config"] = p
    p = out / f"plot_{low}.py"
    p.write_text(plot_script(cfg.id, result.summary_columns))
    paths["plot"] = p
    return paths


_PLOT_TEMPLATE = '''"""Plot {id} ({title}) from {low}_summary.csv.

Needs matplotlib, which blindcs itself does not depend on.
Usage: python plot_{low}.py  (writes {low}.png next to this script)
"""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
with open(here / "{low}_summary.csv", newline="") as fh:
    fh.readline()  # schema line
    rows = list(csv.DictReader(fh))

x_col, y_cols, loglog = {x!r}, {ys!r}, {loglog!r}
fig, ax = plt.subplots(figsize=(5, 3.5))
xs = [float(r[x_col]) for r in rows]
for y in y_cols:
    ys = [float(r[y]) if r[y] else float("nan") for r in rows]
    if len(rows) == 1:
        ax.bar([y], ys)
    else:
        ax.plot(xs, ys, marker="o", label=y)
if len(rows) > 1:
    ax.set_xlabel(x_col)
    ax.legend()
if loglog:
    ax.set_xscale("log")
    ax.set_yscale("log")
ax.set_title("{id}: {title}")
fig.tight_layout()
fig.savefig(here / "{low}.png", dpi=150)
'''


def plot_script(exp_id: str, summary_columns) -> str:
    e = EXPERIMENTS[exp_id]
    x, ys, loglog = e.plot
    ys = [y for y in ys if y in summary_columns]
    return _PLOT_TEMPLATE.format(id=exp_id, low=exp_id.lower(), title=e.title, x=x, ys=ys, loglog=loglog)


# --------------------------------------------------------------------------- bounds table


def emit_bounds_table(ranges: dict, path=None):
    """Evaluate every bound at every point of the grid spanned by ``ranges``.

    ``ranges`` maps ``BoundInputs`` field names to a value or a list of
    values. Returns ``(columns, rows)`` and writes a CSV when ``path`` is
    given. Bounds whose inputs are missing or out of domain are left out.
    """
    names = list(ranges)
    lists = [v if isinstance(v, (list, tuple)) else [v] for v in ranges.values()]
    columns = ["point", "name", "value_rational", "value_int", "vacuous", "inputs"]
    rows = []
    for i, combo in enumerate(itertools.product(*lists)):
        try:
            inputs = BoundInputs(**dict(zip(names, combo)))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        rows.extend((i, *r) for r in io.bounds_rows(bounds_table(inputs)))
    if path is not None:
        io.write_csv(path, "bounds", columns, rows)
    return columns, rows
