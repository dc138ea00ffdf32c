"""Simulation harness and real-data evaluation protocols.

``run_mc`` reproduces the simulated shrinkage experiment: Toeplitz-correlated
Gaussian designs, stationary AR(1) errors, train/validation/test roles, and
per-replication fits of the full, sub-model, pretest, shrinkage and penalized
estimators.  Two error summaries are recorded per estimator:

* ``pmad``     - the out-of-sample predictive mean absolute deviation
                 (1/n_test) sum |y_test - prediction| on the noisy test set;
* ``coef_mad`` - the coefficient-scale mean absolute deviation
                 sum_j |slope_j - true_j| / (p + 1).

The published simulation table is on the coefficient scale (its values sit
far below any achievable noisy-test PMAD, whose floor is E|error| ~ 0.8 at
the stated design), so reproduction targets use ``coef_mad``.  For the
penalized rows the table is additionally only reachable when lambda is tuned
against the data-generating coefficients; ``coef_mad_oracle`` records that
truth-tuned value next to the honest validation-selected ``coef_mad``.

Everything is driven by counter-based streams keyed on
(base_seed, replication, role): results are bitwise reproducible and
independent of execution order or worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dgp
from .covariance import estimate_covariance
from .data import Dataset, PartitionSpec
from .penalized import fit_path, lambda_max, select_by_validation
from .shrinkage import positive_stein, pretest, stein, wald_stat
from .solver import fit_ols, fit_quantile

PENALIZED = ("Ridge", "Lasso", "ENET")
DEFAULT_ESTIMATORS = ("FM", "SM", "PT", "PS", "Ridge", "Lasso", "ENET", "OLS")


def pmad(beta, test: Dataset) -> float:
    """Predictive mean absolute deviation of a coefficient vector on a test set.

    ``beta`` is [intercept, slopes] when the dataset carries an intercept,
    otherwise just slopes.
    """
    beta = np.asarray(beta, dtype=np.float64).ravel()
    off = 1 if test.intercept else 0
    if beta.shape[0] != test.p + off:
        raise ValueError(f"coefficient vector of length {beta.shape[0]} does not "
                         f"match a {test.p}-column dataset")
    pred = test.X @ beta[off:]
    if test.intercept:
        pred = pred + beta[0]
    return float(np.mean(np.abs(test.y - pred)))


def coef_mad(beta, beta_true) -> float:
    """Coefficient-scale MAD: sum_j |slope_j - true_j| / len(beta).

    ``beta`` includes the intercept in slot 0; the intercept deviation is not
    part of the numerator (the truth vector is (0, beta_true) with the
    intercept slot zeroed on both sides), while the denominator is the full
    coefficient count p + 1.  This is the convention under which the
    published simulation table is reproducible.
    """
    beta = np.asarray(beta, dtype=np.float64).ravel()
    bt = np.asarray(beta_true, dtype=np.float64).ravel()
    if beta.shape[0] != bt.shape[0] + 1:
        raise ValueError("expected [intercept, slopes] against a slope-only truth")
    return float(np.sum(np.abs(beta[1:] - bt)) / beta.shape[0])


@dataclass
class SimConfig:
    """Configuration of the simulated experiment (defaults follow the study design)."""

    rho: float = 0.2
    n_train: int = 50
    n_val: int = 50
    n_test: int = 200
    beta_true: tuple = (3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0)
    corr_base: float = 0.5
    tau_list: tuple = (0.25, 0.5, 0.75)
    n_reps: int = 1000
    base_seed: int = 20240801
    keep_idx: tuple = (0, 1, 4)
    estimators: tuple = DEFAULT_ESTIMATORS
    alpha_level: float = 0.05
    enet_alpha: float = 0.95
    n_lambda: int = 100
    lambda_ratio: float | None = None
    ridge_span: tuple = (3.0, 1e-5)
    n_jobs: int = 1

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise ValueError(f"|rho| must be below 1, got {self.rho}")
        p = len(self.beta_true)
        if self.n_train <= p + 1:
            raise ValueError("n_train must exceed the coefficient count")
        for t in self.tau_list:
            if not 0.0 < t < 1.0:
                raise ValueError(f"tau must lie in (0, 1), got {t}")
        if self.n_reps < 1:
            raise ValueError("n_reps must be at least 1")

    @property
    def p(self) -> int:
        return len(self.beta_true)

    @property
    def partition(self) -> PartitionSpec:
        return PartitionSpec.from_keep(self.keep_idx, self.p)


@dataclass
class McSummary:
    """Per-(tau, estimator) metric means and standard errors."""

    rows: list[dict] = field(default_factory=list)

    def row(self, tau, estimator) -> dict:
        for r in self.rows:
            if r["estimator"] == estimator and _tau_eq(r["tau"], tau):
                return r
        raise KeyError(f"no row for tau={tau}, estimator={estimator}")

    def value(self, tau, estimator, metric="coef_mad_mean"):
        return self.row(tau, estimator)[metric]


def _tau_eq(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return abs(a - b) < 1e-12


def _ridge_grid(train: Dataset, tau: float, cfg: SimConfig) -> np.ndarray:
    """Wide documented ridge grid anchored at the lasso threshold."""
    hi, lo_ratio = cfg.ridge_span
    anchor = hi * lambda_max(train, tau, 1.0)
    return anchor * np.exp(np.linspace(0.0, np.log(lo_ratio), cfg.n_lambda))


def _sim_one_rep(cfg: SimConfig, r: int) -> dict:
    """All estimator metrics for replication r; pure function of (cfg, r)."""
    p = cfg.p
    beta_true = np.asarray(cfg.beta_true, dtype=np.float64)
    Xtr = dgp.gen_design(cfg.n_train, p, cfg.corr_base,
                         dgp.stream_rng(cfg.base_seed, r, dgp.ROLE_DESIGN_TRAIN))
    Xva = dgp.gen_design(cfg.n_val, p, cfg.corr_base,
                         dgp.stream_rng(cfg.base_seed, r, dgp.ROLE_DESIGN_VAL))
    Xte = dgp.gen_design(cfg.n_test, p, cfg.corr_base,
                         dgp.stream_rng(cfg.base_seed, r, dgp.ROLE_DESIGN_TEST))
    ytr = Xtr @ beta_true + dgp.gen_ar1_errors(
        cfg.n_train, cfg.rho, dgp.stream_rng(cfg.base_seed, r, dgp.ROLE_ERR_TRAIN))
    yva = Xva @ beta_true + dgp.gen_ar1_errors(
        cfg.n_val, cfg.rho, dgp.stream_rng(cfg.base_seed, r, dgp.ROLE_ERR_VAL))
    yte = Xte @ beta_true + dgp.gen_ar1_errors(
        cfg.n_test, cfg.rho, dgp.stream_rng(cfg.base_seed, r, dgp.ROLE_ERR_TEST))
    mu = Xtr.mean(axis=0)
    train = Dataset(Xtr - mu, ytr)
    val = Dataset(Xva - mu, yva)
    test = Dataset(Xte - mu, yte)
    partition = cfg.partition

    out: dict = {}

    def record(tau, name, beta_vec, oracle=None):
        out[(tau, name)] = dict(
            pmad=pmad(beta_vec, test),
            coef_mad=coef_mad(beta_vec, beta_true),
            coef_mad_oracle=oracle)

    if "OLS" in cfg.estimators:
        try:
            record(None, "OLS", fit_ols(train).beta)
        except Exception as exc:  # noqa: BLE001 - recorded, not silenced
            out[(None, "OLS")] = dict(error=str(exc))

    shrink_kinds = [k for k in ("FM", "SM", "PT", "S", "PS") if k in cfg.estimators]
    for tau in cfg.tau_list:
        if shrink_kinds:
            try:
                fm = fit_quantile(train, tau)
                sm = fit_quantile(train, tau, partition)
                cov = estimate_covariance(train, fm, partition,
                                          sparsity_fits=(fm, sm))
                w = wald_stat(fm, cov, partition, train.n)
                betas = {"FM": fm.beta, "SM": sm.beta}
                if "PT" in shrink_kinds:
                    betas["PT"] = pretest(fm, sm, w, cfg.alpha_level).beta
                if "S" in shrink_kinds:
                    betas["S"] = stein(fm, sm, w, partition.p2).beta
                if "PS" in shrink_kinds:
                    betas["PS"] = positive_stein(fm, sm, w, partition.p2).beta
                for k in shrink_kinds:
                    record(tau, k, betas[k])
            except Exception as exc:  # noqa: BLE001
                for k in shrink_kinds:
                    out[(tau, k)] = dict(error=str(exc))
        for name in PENALIZED:
            if name not in cfg.estimators:
                continue
            try:
                if name == "Ridge":
                    path = fit_path(train, tau, 0.0,
                                    lambdas=_ridge_grid(train, tau, cfg))
                else:
                    am = 1.0 if name == "Lasso" else cfg.enet_alpha
                    path = fit_path(train, tau, am, n_lambda=cfg.n_lambda,
                                    ratio=cfg.lambda_ratio)
                i = select_by_validation(path, val)
                cerrs = np.array([coef_mad(path.betas[:, j], beta_true)
                                  for j in range(path.lambdas.size)])
                record(tau, name, path.betas[:, i], oracle=float(cerrs.min()))
            except Exception as exc:  # noqa: BLE001
                out[(tau, name)] = dict(error=str(exc))
    return out


def run_mc(cfg: SimConfig) -> McSummary:
    """Run the simulated experiment; deterministic under cfg.base_seed.

    Replications run independently (optionally across processes); failures
    are counted per estimator and excluded, never silently dropped.
    """
    reps = range(cfg.n_reps)
    if cfg.n_jobs > 1:
        workers = min(cfg.n_jobs, os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sim_one_rep, [cfg] * cfg.n_reps, reps,
                                    chunksize=max(1, cfg.n_reps // (8 * workers))))
    else:
        results = [_sim_one_rep(cfg, r) for r in reps]

    keys: list[tuple] = []
    for res in results:
        for key in res:
            if key not in keys:
                keys.append(key)
    keys.sort(key=lambda k: (k[0] is not None, k[0] if k[0] is not None else -1.0,
                             k[1]))
    summary = McSummary()
    for tau, name in keys:
        vals = {m: [] for m in ("pmad", "coef_mad", "coef_mad_oracle")}
        n_fail = 0
        for res in results:
            cell = res.get((tau, name))
            if cell is None:
                continue
            if "error" in cell:
                n_fail += 1
                continue
            for m in vals:
                if cell[m] is not None:
                    vals[m].append(cell[m])
        row = {"tau": tau, "estimator": name,
               "n_ok": len(vals["coef_mad"]), "n_fail": n_fail}
        for m, v in vals.items():
            if v:
                arr = np.asarray(v)
                row[f"{m}_mean"] = float(arr.mean())
                row[f"{m}_se"] = float(arr.std(ddof=0) / np.sqrt(arr.size))
            else:
                row[f"{m}_mean"] = None
                row[f"{m}_se"] = None
        summary.rows.append(row)
    return summary


def _fit_estimators_real(train: Dataset, test: Dataset, partition, tau_list,
                         estimators, alpha_level, n_lambda, enet_alpha):
    """PMAD per (tau, estimator) for one train/test split of real data."""
    out = {}
    shrink_kinds = [k for k in ("FM", "SM", "PT", "S", "PS") if k in estimators]
    if "OLS" in estimators:
        try:
            out[(None, "OLS")] = pmad(fit_ols(train).beta, test)
        except Exception:  # noqa: BLE001
            out[(None, "OLS")] = None
    for tau in tau_list:
        if shrink_kinds:
            try:
                fm = fit_quantile(train, tau)
                sm = fit_quantile(train, tau, partition)
                cov = estimate_covariance(train, fm, partition,
                                          sparsity_fits=(fm, sm))
                w = wald_stat(fm, cov, partition, train.n)
                betas = {"FM": fm.beta, "SM": sm.beta}
                if "PT" in shrink_kinds:
                    betas["PT"] = pretest(fm, sm, w, alpha_level).beta
                if "S" in shrink_kinds:
                    betas["S"] = stein(fm, sm, w, partition.p2).beta
                if "PS" in shrink_kinds:
                    betas["PS"] = positive_stein(fm, sm, w, partition.p2).beta
                for k in shrink_kinds:
                    out[(tau, k)] = pmad(betas[k], test)
            except Exception:  # noqa: BLE001
                for k in shrink_kinds:
                    out[(tau, k)] = None
        for name in PENALIZED:
            if name not in estimators:
                continue
            try:
                am = {"Ridge": 0.0, "Lasso": 1.0, "ENET": enet_alpha}[name]
                if name == "Ridge":
                    anchor = 3.0 * lambda_max(train, tau, 1.0)
                    grid = anchor * np.exp(np.linspace(0.0, np.log(1e-5), n_lambda))
                    path = fit_path(train, tau, am, lambdas=grid)
                else:
                    path = fit_path(train, tau, am, n_lambda=n_lambda)
                i = _select_kfold(train, tau, am, path, k=5)
                out[(tau, name)] = pmad(path.betas[:, i], test)
            except Exception:  # noqa: BLE001
                out[(tau, name)] = None
    return out


def _select_kfold(train: Dataset, tau: float, alpha_mix: float,
                  path, k: int = 5) -> int:
    """Pick the path index minimizing k-fold PMAD on the training data."""
    n = train.n
    folds = np.arange(n) % k
    errs = np.zeros(path.lambdas.size)
    counts = 0
    for f in range(k):
        tr = folds != f
        te = folds == f
        if tr.sum() < train.p + 2 or te.sum() == 0:
            continue
        sub = Dataset(train.X[tr], train.y[tr], list(train.labels))
        try:
            sp = fit_path(sub, tau, alpha_mix, lambdas=path.lambdas)
        except Exception:  # noqa: BLE001
            continue
        preds = sp.betas[0][None, :] + train.X[te] @ sp.betas[1:, :]
        errs += np.mean(np.abs(train.y[te][:, None] - preds), axis=0)
        counts += 1
    if counts == 0:
        return int(path.lambdas.size // 2)
    return int(np.argmin(errs))


def evaluate_real(data: Dataset, partition: PartitionSpec, tau_list,
                  mode: str = "bootstrap", *, n_resamples: int = 1000,
                  split_fraction: float = 0.75, k: int = 5, seed: int = 0,
                  estimators=("FM", "SM", "PT", "PS", "OLS"),
                  alpha_level: float = 0.05, n_lambda: int = 100,
                  enet_alpha: float = 0.95) -> McSummary:
    """Bootstrap or k-fold PMAD evaluation of the estimators on user data.

    bootstrap mode: each resample draws n rows with replacement, splits them
    train/test by ``split_fraction``, centers covariates by training means
    and scores every estimator; degenerate resamples (a constant covariate
    column in the training part) are redrawn and counted.  kfold mode: the
    usual k-fold rotation with fold-wise centering.
    """
    partition.validate_for(data.p)
    results = []
    n_redrawn = 0
    if mode == "bootstrap":
        n = data.n
        n_tr = max(int(round(split_fraction * n)), data.p + 2)
        for b in range(n_resamples):
            for attempt in range(100):
                rng = dgp.stream_rng(seed, b * 128 + attempt, dgp.ROLE_RESAMPLE)
                idx = rng.integers(0, n, n)
                tr_idx, te_idx = idx[:n_tr], idx[n_tr:]
                Xtr = data.X[tr_idx]
                if np.all(Xtr.std(axis=0) > 0) and te_idx.size > 0:
                    break
                n_redrawn += 1
            else:
                raise RuntimeError("could not draw a non-degenerate resample")
            mu = Xtr.mean(axis=0)
            train = Dataset(Xtr - mu, data.y[tr_idx], list(data.labels))
            test = Dataset(data.X[te_idx] - mu, data.y[te_idx], list(data.labels))
            results.append(_fit_estimators_real(
                train, test, partition, tau_list, estimators, alpha_level,
                n_lambda, enet_alpha))
    elif mode == "kfold":
        n = data.n
        if not 2 <= k <= n:
            raise ValueError(f"k must lie in [2, n]; got {k}")
        order = dgp.stream_rng(seed, 0, dgp.ROLE_RESAMPLE).permutation(n)
        folds = np.arange(n) % k
        for f in range(k):
            te_idx = order[folds == f]
            tr_idx = order[folds != f]
            Xtr = data.X[tr_idx]
            if np.any(Xtr.std(axis=0) == 0):
                raise ValueError(f"fold {f} leaves a constant covariate column")
            mu = Xtr.mean(axis=0)
            train = Dataset(Xtr - mu, data.y[tr_idx], list(data.labels))
            test = Dataset(data.X[te_idx] - mu, data.y[te_idx], list(data.labels))
            results.append(_fit_estimators_real(
                train, test, partition, tau_list, estimators, alpha_level,
                n_lambda, enet_alpha))
    else:
        raise ValueError(f"unknown mode {mode!r}")

    keys = []
    for res in results:
        for key in res:
            if key not in keys:
                keys.append(key)
    keys.sort(key=lambda kk: (kk[0] is not None,
                              kk[0] if kk[0] is not None else -1.0, kk[1]))
    summary = McSummary()
    for key in keys:
        vals = [res[key] for res in results if res.get(key) is not None]
        n_fail = sum(1 for res in results if res.get(key) is None)
        arr = np.asarray(vals, dtype=np.float64)
        summary.rows.append({
            "tau": key[0], "estimator": key[1],
            "pmad_mean": float(arr.mean()) if arr.size else None,
            "pmad_se": float(arr.std(ddof=0) / np.sqrt(arr.size)) if arr.size else None,
            "n_ok": int(arr.size), "n_fail": n_fail,
            "n_redrawn": n_redrawn})
    return summary
