"""Command-line interface.

Subcommands: fit, test, shrink, penalize, simulate, risk, diagnose,
evaluate, qprocess.  Every run writes CSV tables plus a JSON manifest into
--out-dir; flags override values from an optional JSON --config file.

Exit codes: 0 success, 2 usage/validation error, 3 data error,
4 numerical failure, 1 unexpected error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import io as qio
from .data import PartitionSpec
from .diagnostics import diagnose
from .montecarlo import SimConfig, evaluate_real, run_mc
from .penalized import fit_path, select_by_validation
from .risk import AsymptoticParams, risk_curve
from .shrinkage import shrinkage_suite
from .solver import fit_ols, fit_quantile

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _common_flags(sp, data: bool = True):
    if data:
        sp.add_argument("--data", required=True, help="input CSV with header row")
        sp.add_argument("--response", required=True, help="response column name")
        sp.add_argument("--covariates", nargs="+", default=None,
                        help="covariate columns (default: all others)")
        sp.add_argument("--no-intercept", action="store_true")
    sp.add_argument("--tau", type=float, nargs="+", default=[0.5])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--config", default=None, help="JSON file of defaults")
    sp.add_argument("--out-dir", default="qrshrink_out")


def _partition_flags(sp):
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--keep", type=int, nargs="+",
                   help="1-based covariate positions kept in the sub-model")
    g.add_argument("--test-idx", type=int, nargs="+",
                   help="1-based covariate positions under test")


def _resolve_partition(args, p: int) -> PartitionSpec:
    if getattr(args, "keep", None):
        keep0 = [k - 1 for k in args.keep]
        part = PartitionSpec.from_keep(keep0, p)
    else:
        test0 = set(k - 1 for k in args.test_idx)
        part = PartitionSpec(tuple(j for j in range(p) if j not in test0),
                             tuple(sorted(test0)))
    part.validate_for(p)
    return part


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qrshrink", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("fit", help="full-model quantile fits (and OLS)")
    _common_flags(sp)

    sp = sub.add_parser("test", help="autocorrelation-robust Wald test of a zero block")
    _common_flags(sp)
    _partition_flags(sp)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--bandwidth", type=int, default=None)

    sp = sub.add_parser("shrink", help="FM/SM/PT/S/PS coefficient table")
    _common_flags(sp)
    _partition_flags(sp)
    sp.add_argument("--alpha", type=float, default=0.05)

    sp = sub.add_parser("penalize", help="elastic-net path (optionally validated)")
    _common_flags(sp)
    sp.add_argument("--alpha-mix", type=float, default=0.5)
    sp.add_argument("--n-lambda", type=int, default=100)
    sp.add_argument("--ratio", type=float, default=None)
    sp.add_argument("--val-data", default=None, help="validation CSV for selection")

    sp = sub.add_parser("simulate", help="Monte Carlo shrinkage experiment")
    _common_flags(sp, data=False)
    sp.add_argument("--rho", type=float, nargs="+", default=[0.2])
    sp.add_argument("--n-reps", type=int, default=1000)
    sp.add_argument("--n-train", type=int, default=50)
    sp.add_argument("--n-val", type=int, default=50)
    sp.add_argument("--n-test", type=int, default=200)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--enet-alpha", type=float, default=0.95)
    sp.add_argument("--n-jobs", type=int, default=1)

    sp = sub.add_parser("risk", help="closed-form asymptotic risk curves")
    _common_flags(sp, data=False)
    sp.add_argument("--gamma-csv", default=None,
                    help="p x p information-matrix CSV (no header)")
    sp.add_argument("--p1", type=int, required=True)
    sp.add_argument("--p2", type=int, required=True)
    sp.add_argument("--omega-sq", type=float, default=1.0)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--delta-grid", type=float, nargs="+",
                    default=[0, 0.5, 1, 2, 5, 10, 20])

    sp = sub.add_parser("diagnose", help="DW/VIF/condition/outlier/ACF battery")
    _common_flags(sp)
    sp.add_argument("--max-lag", type=int, default=6)

    sp = sub.add_parser("evaluate", help="bootstrap or k-fold PMAD comparison")
    _common_flags(sp)
    _partition_flags(sp)
    sp.add_argument("--mode", choices=["bootstrap", "kfold"], default="bootstrap")
    sp.add_argument("--n-resamples", type=int, default=1000)
    sp.add_argument("--split-fraction", type=float, default=0.75)
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--estimators", nargs="+",
                    default=["FM", "SM", "PT", "PS", "OLS"])

    sp = sub.add_parser("qprocess", help="tau-sweep coefficient process table")
    _common_flags(sp)
    sp.add_argument("--tau-min", type=float, default=0.05)
    sp.add_argument("--tau-max", type=float, default=0.95)
    sp.add_argument("--tau-count", type=int, default=19)
    sp.add_argument("--n-boot", type=int, default=200)
    return ap


def _apply_config(args: argparse.Namespace, argv: list[str]) -> argparse.Namespace:
    """Fill values from the JSON config for flags not given on the command line."""
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        conf = json.load(fh)
    given = {a.split("=")[0].lstrip("-").replace("-", "_")
             for a in argv if a.startswith("--")}
    for key, val in conf.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and attr not in given:
            setattr(args, attr, val)
    return args


def _load(args):
    data, report = qio.load_csv(args.data, args.response, args.covariates,
                                intercept=not getattr(args, "no_intercept", False))
    return data, report


def _out(args, name: str) -> str:
    import os

    return os.path.join(args.out_dir, name)


def _finish(args, command, started, outputs, extra_args=None):
    payload = {k: v for k, v in vars(args).items()
               if k not in {"command", "func"} and not callable(v)}
    if extra_args:
        payload.update(extra_args)
    manifest = _out(args, f"{command}_manifest.json")
    qio.write_manifest(manifest, command=command, args=payload,
                       seed=getattr(args, "seed", None),
                       outputs=outputs, started=started)
    for o in outputs + [manifest]:
        print(o)


def cmd_fit(args, started):
    data, report = _load(args)
    rows = []
    for tau in args.tau:
        fit = fit_quantile(data, tau)
        for name, b in zip(fit.labels, fit.beta):
            rows.append([tau, name, b, fit.objective, fit.status])
    ols = fit_ols(data)
    for name, b in zip(ols.labels, ols.beta):
        rows.append(["ols", name, b, ols.objective, ols.status])
    out = _out(args, "fit_coefficients.csv")
    qio.write_csv(out, ["tau", "coefficient", "estimate", "objective", "status"], rows)
    _finish(args, "fit", started, [out], {"load_report": report})
    return EXIT_OK


def cmd_test(args, started):
    data, report = _load(args)
    part = _resolve_partition(args, data.p)
    rows = []
    for tau in args.tau:
        suite = shrinkage_suite(data, tau, part, alpha_level=args.alpha,
                                bandwidth=args.bandwidth, kinds=("FM", "SM", "PT"))
        pt = suite.results["PT"]
        rows.append([tau, suite.wald, part.p2, pt.critical, args.alpha,
                     "reject" if not pt.took_submodel else "keep",
                     suite.cov.omega_sq, suite.cov.bandwidth])
    out = _out(args, "wald_test.csv")
    qio.write_csv(out, ["tau", "wald", "df", "critical", "alpha", "h0",
                        "omega_sq", "hac_lags"], rows)
    _finish(args, "test", started, [out], {"load_report": report})
    return EXIT_OK


def cmd_shrink(args, started):
    data, report = _load(args)
    part = _resolve_partition(args, data.p)
    kinds = ("FM", "SM", "PT", "S", "PS") if part.p2 >= 3 else ("FM", "SM", "PT")
    rows = []
    for tau in args.tau:
        suite = shrinkage_suite(data, tau, part, alpha_level=args.alpha, kinds=kinds)
        names = suite.fit_fm.labels
        for kind, res in suite.results.items():
            for name, b in zip(names, res.beta):
                rows.append([tau, kind, name, b, suite.wald])
    out = _out(args, "shrinkage_coefficients.csv")
    qio.write_csv(out, ["tau", "estimator", "coefficient", "estimate", "wald"], rows)
    _finish(args, "shrink", started, [out], {"load_report": report})
    return EXIT_OK


def cmd_penalize(args, started):
    data, report = _load(args)
    val = None
    if args.val_data:
        val, _ = qio.load_csv(args.val_data, args.response, args.covariates)
    outputs = []
    for tau in args.tau:
        path = fit_path(data, tau, args.alpha_mix, n_lambda=args.n_lambda,
                        ratio=args.ratio)
        sel = select_by_validation(path, val) if val is not None else None
        rows = []
        names = ["(intercept)"] + list(data.labels)
        for i, lam in enumerate(path.lambdas):
            for name, b in zip(names, path.betas[:, i]):
                rows.append([tau, i, lam, name, b, int(i == sel) if sel is not None else ""])
        out = _out(args, f"penalized_path_tau{tau}.csv")
        qio.write_csv(out, ["tau", "index", "lambda", "coefficient", "estimate",
                            "selected"], rows)
        outputs.append(out)
    _finish(args, "penalize", started, outputs, {"load_report": report})
    return EXIT_OK


def cmd_simulate(args, started):
    outputs = []
    rows = []
    for rho in args.rho:
        cfg = SimConfig(rho=rho, n_reps=args.n_reps, base_seed=args.seed,
                        tau_list=tuple(args.tau), alpha_level=args.alpha,
                        enet_alpha=args.enet_alpha, n_jobs=args.n_jobs,
                        n_train=args.n_train, n_val=args.n_val,
                        n_test=args.n_test)
        summary = run_mc(cfg)
        for r in summary.rows:
            rows.append([rho, "mean" if r["tau"] is None else r["tau"],
                         r["estimator"],
                         r["coef_mad_mean"], r["coef_mad_se"],
                         r["pmad_mean"], r["pmad_se"],
                         r["coef_mad_oracle_mean"], r["coef_mad_oracle_se"],
                         r["n_ok"], r["n_fail"]])
    out = _out(args, "simulated_pmad.csv")
    qio.write_csv(out, ["rho", "tau", "estimator", "coef_mad", "coef_mad_se",
                        "pmad", "pmad_se", "coef_mad_oracle",
                        "coef_mad_oracle_se", "n_ok", "n_fail"], rows)
    outputs.append(out)
    _finish(args, "simulate", started, outputs)
    return EXIT_OK


def cmd_risk(args, started):
    p = args.p1 + args.p2
    if args.gamma_csv:
        G = np.loadtxt(args.gamma_csv, delimiter=",")
        if G.shape != (p, p):
            raise ValueError(f"gamma matrix must be {p}x{p}, got {G.shape}")
    else:
        G = np.eye(p)
    params = AsymptoticParams(G[:args.p1, :args.p1], G[:args.p1, args.p1:],
                              G[args.p1:, args.p1:], args.omega_sq,
                              np.ones(args.p2))
    pts = risk_curve(params, ("FM", "SM", "PT", "S", "PS"), args.delta_grid,
                     alpha_level=args.alpha)
    rows = [[pt.noncentrality] + [pt.risks[k] for k in ("FM", "SM", "PT", "S", "PS")]
            for pt in pts]
    out = _out(args, "risk_curve.csv")
    qio.write_csv(out, ["noncentrality", "FM", "SM", "PT", "S", "PS"], rows)
    _finish(args, "risk", started, [out])
    return EXIT_OK


def cmd_diagnose(args, started):
    data, report = _load(args)
    rep = diagnose(data, max_lag=args.max_lag, seed=args.seed)
    outputs = []
    out = _out(args, "durbin_watson.csv")
    qio.write_csv(out, ["lag", "autocorrelation", "dw", "p_value"],
                  [[r["lag"], r["autocorrelation"], r["dw"], r["p_value"]]
                   for r in rep.dw_rows])
    outputs.append(out)
    out = _out(args, "vif.csv")
    qio.write_csv(out, ["covariate", "vif"], list(rep.vif.items()))
    outputs.append(out)
    out = _out(args, "outliers.csv")
    qio.write_csv(out, ["index", "studentized", "p_adjusted"],
                  [[o["index"], o["studentized"], o["p_adjusted"]]
                   for o in rep.outliers])
    outputs.append(out)
    out = _out(args, "acf.csv")
    qio.write_csv(out, ["lag", "acf"], list(enumerate(rep.acf)))
    outputs.append(out)
    out = _out(args, "condition.csv")
    qio.write_csv(out, ["condition_ratio"], [[rep.condition_ratio]])
    outputs.append(out)
    _finish(args, "diagnose", started, outputs, {"load_report": report})
    return EXIT_OK


def cmd_evaluate(args, started):
    data, report = _load(args)
    part = _resolve_partition(args, data.p)
    summary = evaluate_real(data, part, tuple(args.tau), args.mode,
                            n_resamples=args.n_resamples,
                            split_fraction=args.split_fraction, k=args.k,
                            seed=args.seed, estimators=tuple(args.estimators),
                            alpha_level=args.alpha)
    rows = [["mean" if r["tau"] is None else r["tau"], r["estimator"],
             r["pmad_mean"], r["pmad_se"], r["n_ok"], r["n_fail"], r["n_redrawn"]]
            for r in summary.rows]
    out = _out(args, "evaluate_pmad.csv")
    qio.write_csv(out, ["tau", "estimator", "pmad", "pmad_se", "n_ok",
                        "n_fail", "n_redrawn"], rows)
    _finish(args, "evaluate", started, [out], {"load_report": report})
    return EXIT_OK


def cmd_qprocess(args, started):
    data, report = _load(args)
    grid = np.linspace(args.tau_min, args.tau_max, args.tau_count)
    rows, failures = quantile_process_rows(data, grid, args.n_boot, args.seed)
    out = _out(args, "quantile_process.csv")
    qio.write_csv(out, ["coefficient", "tau", "estimate", "band_low",
                        "band_high", "ols_estimate", "ols_low", "ols_high"],
                  [[r["coefficient"], r["tau"], r["estimate"], r["band_low"],
                    r["band_high"], r["ols_estimate"], r["ols_low"],
                    r["ols_high"]] for r in rows])
    _finish(args, "qprocess", started, [out],
            {"load_report": report, "bootstrap_failures": failures})
    return EXIT_OK


def quantile_process_rows(data, grid, n_boot, seed):
    return qio.quantile_process(data, grid, n_boot=n_boot, seed=seed)


_DISPATCH = {
    "fit": cmd_fit,
    "test": cmd_test,
    "shrink": cmd_shrink,
    "penalize": cmd_penalize,
    "simulate": cmd_simulate,
    "risk": cmd_risk,
    "diagnose": cmd_diagnose,
    "evaluate": cmd_evaluate,
    "qprocess": cmd_qprocess,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.time()
    try:
        args = _apply_config(args, argv)
        return _DISPATCH[args.command](args, started)
    except (FileNotFoundError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        msg = str(exc)
        print(f"error: {msg}", file=sys.stderr)
        data_markers = ("column", "file", "csv", "row")
        return EXIT_DATA if any(m in msg.lower() for m in data_markers) else EXIT_USAGE
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as exc:  # noqa: BLE001
        print(f"unexpected error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
