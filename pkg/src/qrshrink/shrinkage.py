"""Wald test of a zero restriction and the combined estimators.

FM and SM come from the solver; this module builds the pretest (PT),
Stein (S) and positive-part Stein (PS) combinations, plus BIC-based
sub-model selection for the two-step procedure on real data.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from . import chisq
from .covariance import CovarianceEstimate, estimate_covariance
from .data import Dataset, PartitionSpec
from .solver import QuantileFit, fit_quantile


@dataclass
class ShrinkageResult:
    """A combined estimator: coefficients plus the decision ingredients."""

    kind: str  # FM | SM | PT | S | PS
    beta: np.ndarray
    wald: float
    d: float
    critical: float | None = None
    alpha_level: float | None = None
    took_submodel: bool | None = None


def _test_block(fit: QuantileFit, partition: PartitionSpec) -> np.ndarray:
    off = 1 if fit.intercept else 0
    return fit.beta[[j + off for j in partition.test_idx]]


def wald_stat(fit_fm: QuantileFit, cov: CovarianceEstimate,
              partition: PartitionSpec, n: int) -> float:
    """Autocorrelation-robust Wald statistic for H0: tested block = 0.

    W = n * omega^-2 * b2' M b2 with M the omega^2-normalized precision of
    the tested sub-vector (``cov.test_precision``); asymptotically
    chi-square with p2 degrees of freedom under H0, exactly invariant under
    invertible reparameterizations of the tested columns.
    """
    b2 = _test_block(fit_fm, partition)
    M = cov.test_precision
    if M.shape[0] != b2.shape[0]:
        raise ValueError(
            f"test block has {b2.shape[0]} coefficients, weight is {M.shape[0]}x{M.shape[1]}")
    w = float(n / cov.omega_sq * (b2 @ M @ b2))
    return max(w, 0.0)


def pretest(fit_fm: QuantileFit, fit_sm: QuantileFit, wald: float,
            alpha_level: float) -> ShrinkageResult:
    """Pretest estimator: SM when W < chi2_{p2, alpha} upper quantile, else FM."""
    if not 0.0 < alpha_level < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha_level}")
    p2 = _check_pair(fit_fm, fit_sm)
    crit = chisq.chi2_ppf(1.0 - alpha_level, p2)
    take_sm = wald < crit
    beta = fit_sm.beta.copy() if take_sm else fit_fm.beta.copy()
    return ShrinkageResult(kind="PT", beta=beta, wald=float(wald), d=float(p2 - 2),
                           critical=crit, alpha_level=alpha_level,
                           took_submodel=take_sm)


def stein(fit_fm: QuantileFit, fit_sm: QuantileFit, wald: float, p2: int) -> ShrinkageResult:
    """Stein-type estimator FM - d (FM - SM) / W with d = p2 - 2."""
    _check_pair(fit_fm, fit_sm, p2)
    d = float(p2 - 2)
    if p2 < 3:
        raise ValueError(f"Stein shrinkage needs p2 >= 3 (d = p2 - 2 >= 1); got p2={p2}")
    if d < 3:
        warnings.warn("d = p2 - 2 is below 3; shrinkage gains may be modest",
                      stacklevel=2)
    if wald <= 0.0:
        raise ValueError("shrinkage undefined at zero Wald")
    beta = fit_fm.beta - (d / wald) * (fit_fm.beta - fit_sm.beta)
    return ShrinkageResult(kind="S", beta=beta, wald=float(wald), d=d)


def positive_stein(fit_fm: QuantileFit, fit_sm: QuantileFit, wald: float,
                   p2: int) -> ShrinkageResult:
    """Positive-part Stein: equals S for W > d and collapses to SM for W <= d."""
    _check_pair(fit_fm, fit_sm, p2)
    d = float(p2 - 2)
    if p2 < 3:
        raise ValueError(f"Stein shrinkage needs p2 >= 3 (d = p2 - 2 >= 1); got p2={p2}")
    if wald <= 0.0:
        raise ValueError("shrinkage undefined at zero Wald")
    if wald <= d:
        beta = fit_sm.beta.copy()
    else:
        beta = fit_fm.beta - (d / wald) * (fit_fm.beta - fit_sm.beta)
    return ShrinkageResult(kind="PS", beta=beta, wald=float(wald), d=d)


def _check_pair(fit_fm: QuantileFit, fit_sm: QuantileFit, p2: int | None = None) -> int:
    if fit_fm.tau != fit_sm.tau:
        raise ValueError("FM and SM fits are at different quantile levels")
    if fit_fm.beta.shape != fit_sm.beta.shape:
        raise ValueError("FM and SM coefficient vectors have different lengths")
    if fit_sm.partition is None:
        raise ValueError("the sub-model fit carries no partition")
    got = fit_sm.partition.p2
    if p2 is not None and p2 != got:
        raise ValueError(f"p2={p2} does not match the sub-model partition ({got})")
    return got


@dataclass
class ShrinkageSuite:
    """All five estimators from one data/partition/tau configuration."""

    fit_fm: QuantileFit
    fit_sm: QuantileFit
    cov: CovarianceEstimate
    wald: float
    results: dict[str, ShrinkageResult]


def shrinkage_suite(data: Dataset, tau: float, partition: PartitionSpec,
                    alpha_level: float = 0.05,
                    bandwidth: int | None = None,
                    kinds=("FM", "SM", "PT", "S", "PS")) -> ShrinkageSuite:
    """Fit FM and SM, run the Wald test, and build the requested combinations."""
    fit_fm = fit_quantile(data, tau)
    fit_sm = fit_quantile(data, tau, partition)
    cov = estimate_covariance(data, fit_fm, partition, bandwidth=bandwidth,
                              sparsity_fits=(fit_fm, fit_sm))
    w = wald_stat(fit_fm, cov, partition, data.n)
    p2 = partition.p2
    d = float(p2 - 2)
    out: dict[str, ShrinkageResult] = {}
    for kind in kinds:
        if kind == "FM":
            out[kind] = ShrinkageResult("FM", fit_fm.beta.copy(), w, d)
        elif kind == "SM":
            out[kind] = ShrinkageResult("SM", fit_sm.beta.copy(), w, d)
        elif kind == "PT":
            out[kind] = pretest(fit_fm, fit_sm, w, alpha_level)
        elif kind == "S":
            out[kind] = stein(fit_fm, fit_sm, w, p2)
        elif kind == "PS":
            out[kind] = positive_stein(fit_fm, fit_sm, w, p2)
        else:
            raise ValueError(f"unknown estimator kind {kind!r}")
    return ShrinkageSuite(fit_fm, fit_sm, cov, w, out)


def quantile_bic(data: Dataset, tau: float, keep_idx) -> float:
    """2n log(mean check loss) + k log n for the sub-model keeping ``keep_idx``."""
    n = data.n
    if len(keep_idx) == data.p:
        fit = fit_quantile(data, tau)
    else:
        part = PartitionSpec.from_keep(keep_idx, data.p)
        fit = fit_quantile(data, tau, part)
    mean_loss = max(fit.objective / n, 1e-300)
    k = len(keep_idx) + (1 if data.intercept else 0)
    return float(2.0 * n * np.log(mean_loss) + k * np.log(n))


def select_submodel_bic(data: Dataset, tau: float, max_subset: int = 15) -> PartitionSpec:
    """Pick the keep set minimizing the quantile BIC; exhaustive search up to
    ``max_subset`` covariates, forward stepwise beyond.

    The intercept is always kept and never counted in the partition.  When
    the empty keep set wins, the intercept-only model is reported through a
    partition testing every covariate.
    """
    p = data.p
    if p <= max_subset:
        best, best_keep = np.inf, ()
        for size in range(0, p + 1):
            for keep in itertools.combinations(range(p), size):
                score = quantile_bic(data, tau, keep)
                if score < best - 1e-12:
                    best, best_keep = score, keep
    else:
        best_keep = ()
        best = quantile_bic(data, tau, ())
        remaining = set(range(p))
        while remaining:
            scored = [(quantile_bic(data, tau, tuple(sorted(best_keep + (j,)))), j)
                      for j in sorted(remaining)]
            score, j = min(scored)
            if score >= best - 1e-12:
                break
            best, best_keep = score, tuple(sorted(best_keep + (j,)))
            remaining.discard(j)
    if len(best_keep) == p:
        raise ValueError(
            "BIC keeps every covariate; there is no tested block and the "
            "full-model fit is already the preferred estimator")
    return PartitionSpec.from_keep(best_keep, p)
