"""Command-line interface: ``blindcs <subcommand> ...``.

Exit codes: 0 on success, 1 on a config or input error, 2 when ``--check``
is given and an acceptance threshold is violated.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .bcs import hybrid_bcs
from .dictlearn import CompressiveData, RefineOptions, estimate_dictionary, refine_dictionary
from .errors import BCSError
from .evaluate import bcs_success, group_error, match_columns
from .experiments import EXPERIMENTS, emit_bounds_table, load_config, run_experiment
from .grouping import GROUP_TOL, group_from_sketch
from .measurement import HybridEnsemble, apply, sample_gaussian, sample_hybrid
from .model import ProblemDims, synthesize

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _num_list(kind):
    def parse(text):
        vals = [kind(v) for v in text.split(",") if v]
        return vals if len(vals) > 1 else vals[0]
    return parse


def _common(seed=False, out=False, tol=None, workers=False, check=False):
    p = argparse.ArgumentParser(add_help=False)
    if seed:
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    if out:
        p.add_argument("--out", type=Path, required=out == "required", help="output path")
    if tol is not None:
        p.add_argument("--tol", type=float, default=tol, help=f"numerical tolerance (default {tol:g})")
    if workers:
        p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    if check:
        p.add_argument("--check", action="store_true", help="exit 2 if an acceptance threshold fails")
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="blindcs", description="Blind compressed sensing toolkit.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bounds", parents=[_common(out=True)],
                       help="evaluate every closed-form bound over a grid of inputs")
    for name, kind in [("d", int), ("m", int), ("k", int), ("p", int), ("p_f", int), ("p_v", int),
                       ("ell", int), ("r", int), ("beta", float), ("delta", float), ("t", float),
                       ("mu", float), ("eta", float), ("gamma_k", float)]:
        b.add_argument(f"--{name.replace('_', '-')}", dest=name, type=_num_list(kind),
                       help="value or comma-separated list")

    s = sub.add_parser("synth", parents=[_common(seed=True, out="required")], help="generate Y = A X")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--ell", type=int, help="balanced layout: ell columns per support")
    g.add_argument("--n", type=int, help="iid supports: n columns")
    s.add_argument("--coeff-model", choices=["interval", "symmetric"], default="interval")

    m = sub.add_parser("measure", parents=[_common(seed=True, out="required")],
                       help="add per-column measurements to an instance")
    m.add_argument("instance", type=Path)
    m.add_argument("--scheme", choices=["gaussian", "hybrid"], default="hybrid")
    m.add_argument("--p", type=int, help="rows per column (gaussian scheme)")
    m.add_argument("--p-f", type=int, help="fixed rows (hybrid scheme)")
    m.add_argument("--p-v", type=int, help="varying rows (hybrid scheme)")

    gr = sub.add_parser("group", parents=[_common(out=True, tol=GROUP_TOL)],
                        help="group columns by support from the fixed sketch")
    gr.add_argument("measured", type=Path)

    r = sub.add_parser("recover", parents=[_common(seed=True, out=True, tol=GROUP_TOL, check=True)],
                       help="full hybrid pipeline: group, recover, extract atoms, code")
    r.add_argument("measured", type=Path)
    r.add_argument("--success-tol", type=float, default=1e-6)

    dl = sub.add_parser("dictlearn", parents=[_common(seed=True, out=True)],
                        help="spectral dictionary estimate plus refinement")
    dl.add_argument("input", type=Path, help="instance (complete) or measured instance (compressive)")
    dl.add_argument("--mode", choices=["complete", "compressive"], default="complete")
    dl.add_argument("--threshold", type=float, default=0.5)
    dl.add_argument("--refine-iters", type=int, default=30, help="0 disables refinement")

    ex = sub.add_parser("experiment", help="seeded experiments E1..E7")
    exs = ex.add_subparsers(dest="action", required=True, parser_class=_Parser)
    run = exs.add_parser("run", parents=[_common(out=True, workers=True, check=True)])
    run.add_argument("config", help="TOML config file or an experiment id such as E3")
    run.add_argument("--seed", type=int, default=None, help="override the config's master seed")
    run.add_argument("--trials", type=int, default=None, help="override the trial count")
    exs.add_parser("list")
    return ap


def _write_rows(out, schema, cols, rows):
    if out is None:
        print(",".join(cols))
        for row in rows:
            print(",".join(io.format_value(v) for v in row))
    else:
        io.write_csv(out, schema, cols, rows)
        print(f"wrote {out}")


def _cmd_bounds(a):
    names = ["d", "m", "k", "p", "p_f", "p_v", "ell", "r", "beta", "delta", "t", "mu", "eta", "gamma_k"]
    ranges = {n: getattr(a, n) for n in names if getattr(a, n) is not None}
    cols, rows = emit_bounds_table(ranges)
    _write_rows(a.out, "bounds", cols, rows)
    return EXIT_OK


def _cmd_synth(a):
    if a.ell is not None:
        dims, mode = ProblemDims.balanced(a.d, a.m, a.k, a.ell), "balanced"
    else:
        dims, mode = ProblemDims(a.d, a.m, a.k, a.n), "iid"
    inst = synthesize(dims, a.coeff_model, mode, a.seed)
    io.save_instance(a.out, inst)
    print(f"wrote {a.out}: d={dims.d} m={dims.m} k={dims.k} n={dims.n} ({mode})")
    return EXIT_OK


def _cmd_measure(a):
    inst, _ = io.load_instance(a.instance)
    d, n = inst.dims.d, inst.dims.n
    if a.scheme == "gaussian":
        if a.p is None:
            raise BCSError("--p is required for the gaussian scheme")
        ens = sample_gaussian(a.p, d, n, a.seed)
    else:
        if a.p_f is None or a.p_v is None:
            raise BCSError("--p-f and --p-v are required for the hybrid scheme")
        ens = sample_hybrid(a.p_f, a.p_v, d, n, a.seed)
    io.save_instance(a.out, inst, apply(ens, inst.Y))
    print(f"wrote {a.out}: {a.scheme}, p={ens.p}")
    return EXIT_OK


def _load_hybrid(path):
    inst, rec = io.load_instance(path)
    if rec is None or not isinstance(rec.ensemble, HybridEnsemble):
        raise BCSError(f"{path}: needs hybrid measurements (run `blindcs measure --scheme hybrid`)")
    return inst, rec


def _cmd_group(a):
    inst, rec = _load_hybrid(a.measured)
    g = group_from_sketch(rec.fixed_sketch, inst.dims.k, tol=a.tol)
    _write_rows(a.out, "grouping", ["column_index", "group_id", "certified_rank"], io.grouping_rows(g))
    print(f"{len(g.groups)} groups, {len(g.ungrouped)} ungrouped, {len(g.contaminated)} contaminated",
          file=sys.stderr)
    return EXIT_OK


def _cmd_recover(a):
    inst, rec = _load_hybrid(a.measured)
    k, m = inst.dims.k, inst.dims.m
    res = hybrid_bcs(rec.ensemble, rec, k, m, group_tol=a.tol, seed=a.seed)
    if res.atoms is None or res.atoms.shape[1] < m or res.coefficients is None:
        found = 0 if res.atoms is None else res.atoms.shape[1]
        print(f"recovered {found} of {m} atoms; coefficients not computed")
        return EXIT_CHECK if a.check else EXIT_OK
    rep = match_columns(res.atoms, inst.A)
    ok = bcs_success(inst, res.Y, rep, a.success_tol)
    print(f"groups={len(res.grouping.groups)} kept={len(res.recoverable.groups)} "
          f"Y error={group_error(res.Y, inst.Y):.3e} max atom error={rep.max_error:.3e}")
    if a.out is not None:
        a.out.mkdir(parents=True, exist_ok=True)
        io.save_container(a.out / "recovered.npz", {"kind": "recovered", "k": k, "m": m},
                          A=res.atoms, X=res.coefficients.X, Y=res.Y)
        io.write_csv(a.out / "match.csv", "match", ["atom", "matched_to", "sign", "error"], io.match_rows(rep))
        io.write_csv(a.out / "coefficients.csv", "triplets", ["column", "atom", "value"],
                     io.triplet_rows(res.coefficients.X))
        print(f"wrote {a.out}")
    if a.check and not (ok.y_exact and ok.dict_exact):
        return EXIT_CHECK
    return EXIT_OK


def _cmd_dictlearn(a):
    inst, rec = io.load_instance(a.input)
    k, m = inst.dims.k, inst.dims.m
    if a.mode == "complete":
        data = inst.Y
        est = estimate_dictionary(data, m, k, threshold=a.threshold, seed=a.seed)
    else:
        if rec is None or not isinstance(rec.ensemble, HybridEnsemble):
            raise BCSError("compressive mode needs a hybrid-measured instance")
        data = CompressiveData.from_record(rec.ensemble, rec)
        est = estimate_dictionary(data, m, k, mode="compressive", threshold=a.threshold, seed=a.seed)
    rep = match_columns(est.atoms, inst.A)
    print(f"spectral: mean atom error {rep.mean_error:.3e}, max {rep.max_error:.3e}")
    final = est
    if a.refine_iters > 0:
        final = refine_dictionary(est, data, k, RefineOptions(iters=a.refine_iters),
                                  ensemble=rec.ensemble if rec is not None else None, record=rec, seed=a.seed)
        rep = match_columns(final.atoms, inst.A)
        print(f"refined:  mean atom error {rep.mean_error:.3e}, max {rep.max_error:.3e}")
    if a.out is not None:
        a.out.mkdir(parents=True, exist_ok=True)
        io.save_container(a.out / "dictionary.npz", {"kind": "dictionary", "mode": a.mode}, A=final.atoms)
        io.write_csv(a.out / "match.csv", "match", ["atom", "matched_to", "sign", "error"], io.match_rows(rep))
        if est.clusters is not None:
            io.write_csv(a.out / "clusters.csv", "clusters", ["cluster", "column"], io.cluster_rows(est.clusters))
        print(f"wrote {a.out}")
    return EXIT_OK


def _cmd_experiment(a):
    if a.action == "list":
        for e in EXPERIMENTS.values():
            axes = ", ".join(f"{k}={v}" for k, v in e.grid.items())
            print(f"{e.id}  {e.title}  [{axes}; {e.trials} trials]")
        return EXIT_OK
    cfg = load_config(a.config)
    if a.seed is not None:
        cfg.seed = a.seed
    if a.trials is not None:
        cfg.trials = a.trials
    out = a.out if a.out is not None else (cfg.out or Path("results") / cfg.id.lower())
    res = run_experiment(cfg, workers=a.workers, out=out)
    _write_rows(None, "summary", res.summary_columns, res.summary_rows)
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.6g} {c.relation} {c.threshold:.6g}")
    print(f"wrote {out}")
    if a.check and not res.passed:
        return EXIT_CHECK
    return EXIT_OK


_COMMANDS = {
    "bounds": _cmd_bounds,
    "synth": _cmd_synth,
    "measure": _cmd_measure,
    "group": _cmd_group,
    "recover": _cmd_recover,
    "dictlearn": _cmd_dictlearn,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (BCSError, OSError, ValueError) as exc:
        print(f"blindcs: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
