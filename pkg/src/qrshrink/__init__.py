"""Quantile regression with pretest and Stein-type shrinkage under
autocorrelated errors: exact solvers, robust Wald inference, penalized
paths, closed-form asymptotic risks, and a reproducible Monte Carlo harness.
"""

from . import _kernels
from .chisq import chi2_cdf, chi2_ppf, expect_inv_ncchisq, ncchisq_cdf, truncated_moment
from .covariance import (CovarianceEstimate, estimate_A_hac, estimate_D0,
                         estimate_covariance, estimate_sparsity)
from .data import Dataset, PartitionSpec
from .diagnostics import (DiagnosticsReport, acf, condition_ratio, diagnose,
                          durbin_watson, outlier_test, vif)
from .dgp import gen_ar1_errors, gen_design, stream_rng
from .io import load_csv, quantile_process
from .montecarlo import (McSummary, SimConfig, coef_mad, evaluate_real, pmad,
                         run_mc)
from .penalized import (PenalizedPath, fit_path, fit_penalized, lambda_max,
                        select_by_validation)
from .risk import (AsymptoticParams, RiskPoint, mc_risk_oracle, risk,
                   risk_curve)
from .shrinkage import (ShrinkageResult, positive_stein, pretest,
                        select_submodel_bic, shrinkage_suite, stein, wald_stat)
from .solver import QuantileFit, check_loss, fit_ols, fit_quantile

__version__ = "0.1.0"


def kernel_backend() -> str:
    """Which hot-kernel backend is active: 'compiled' or 'python'."""
    return _kernels.BACKEND


__all__ = [
    "AsymptoticParams", "CovarianceEstimate", "Dataset", "DiagnosticsReport",
    "McSummary", "PartitionSpec", "PenalizedPath", "QuantileFit", "RiskPoint",
    "ShrinkageResult", "SimConfig", "acf", "check_loss", "chi2_cdf",
    "chi2_ppf", "coef_mad", "condition_ratio", "diagnose", "durbin_watson",
    "estimate_A_hac", "estimate_D0", "estimate_covariance",
    "estimate_sparsity", "evaluate_real", "expect_inv_ncchisq", "fit_ols",
    "fit_path", "fit_penalized", "fit_quantile", "gen_ar1_errors",
    "gen_design", "kernel_backend", "lambda_max", "load_csv",
    "mc_risk_oracle", "ncchisq_cdf", "outlier_test", "pmad",
    "positive_stein", "pretest", "quantile_process", "risk", "risk_curve",
    "run_mc", "select_by_validation", "select_submodel_bic",
    "shrinkage_suite", "stein", "stream_rng", "truncated_moment", "vif",
    "wald_stat",
]
