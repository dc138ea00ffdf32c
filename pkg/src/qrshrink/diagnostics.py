"""Regression diagnostics: serial correlation, collinearity, outliers.

The Durbin-Watson p-values come from a seeded permutation bootstrap of the
residual order (distribution-free); the VIF, condition-ratio and
studentized-outlier computations are the classical ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import t as t_dist

from .data import Dataset
from .dgp import ROLE_PERMUTE, stream_rng
from .solver import fit_ols


@dataclass
class DiagnosticsReport:
    """Outputs of the diagnostic battery on one fitted model."""

    dw_rows: list[dict] = field(default_factory=list)
    vif: dict[str, float] = field(default_factory=dict)
    condition_ratio: float = np.nan
    outliers: list[dict] = field(default_factory=list)
    acf: np.ndarray | None = None


def acf(residuals, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelations for lags 0..max_lag (lag 0 equals 1)."""
    r = np.asarray(residuals, dtype=np.float64)
    n = r.size
    if max_lag >= n:
        raise ValueError(f"max_lag {max_lag} must be below n={n}")
    c = r - r.mean()
    denom = float(c @ c)
    if denom == 0.0:
        raise ValueError("constant residuals have no autocorrelation")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for lag in range(1, max_lag + 1):
        out[lag] = float(c[lag:] @ c[:-lag]) / denom
    return out


def _dw_value(r: np.ndarray, lag: int) -> float:
    """Generalized DW: lag-differenced sum of squares over the symmetrized
    second moment of the overlapping segments (mean-centered series).

    This normalization shares its denominator with ``_lag_corr``, so the
    reported statistic and autocorrelation are two readings of one scale;
    with a raw-sum denominator the pair would drift apart by O(lag/n) edge
    terms, outrunning the 2(1 - r) approximation at higher lags.
    """
    c = r - r.mean()
    u, v = c[lag:], c[:-lag]
    diff = u - v
    denom = 0.5 * (float(u @ u) + float(v @ v))
    if denom == 0.0:
        return 0.0
    return float(diff @ diff) / denom


def _lag_corr(r: np.ndarray, lag: int) -> float:
    """Lag correlation on the same overlapping segments as ``_dw_value``."""
    c = r - r.mean()
    u, v = c[lag:], c[:-lag]
    denom = 0.5 * (float(u @ u) + float(v @ v))
    if denom == 0.0:
        return float("nan")
    return float(u @ v) / denom


def durbin_watson(residuals, lag: int = 1, *, n_permutations: int = 2000,
                  seed: int = 0) -> tuple[float, float, float]:
    """Generalized Durbin-Watson test at the given lag.

    Returns (autocorrelation, DW statistic, permutation p-value).  The
    statistic is sum_{i>lag} (r_i - r_{i-lag})^2 / sum r_i^2, close to
    2 (1 - acf(lag)) in large samples; the two-sided p-value permutes the
    residual order ``n_permutations`` times under a fixed seed.
    """
    r = np.asarray(residuals, dtype=np.float64)
    n = r.size
    if lag < 1:
        raise ValueError("lag must be at least 1")
    if lag >= n / 4:
        raise ValueError(f"lag {lag} too large for n={n} (need lag < n/4)")
    if np.ptp(r) == 0.0:
        return float("nan"), 0.0, 1.0
    rho = _lag_corr(r, lag)
    dw = _dw_value(r, lag)
    rng = stream_rng(seed, lag, ROLE_PERMUTE)
    lo = hi = 0
    for _ in range(n_permutations):
        perm = rng.permutation(r)
        d = _dw_value(perm, lag)
        lo += d <= dw
        hi += d >= dw
    p_low = (lo + 1) / (n_permutations + 1)
    p_high = (hi + 1) / (n_permutations + 1)
    p = min(1.0, 2.0 * min(p_low, p_high))
    return rho, dw, p


def vif(data: Dataset) -> dict[str, float]:
    """Variance inflation factors 1/(1 - R^2_j) per covariate.

    Exact collinearity reports inf and names a culpable partner column.
    """
    X = data.X
    n, p = X.shape
    if p < 2:
        raise ValueError("VIF needs at least two covariates")
    out: dict[str, float] = {}
    for j in range(p):
        others = [k for k in range(p) if k != j]
        Z = np.column_stack([np.ones(n), X[:, others]])
        yj = X[:, j]
        beta, res, rank, _ = np.linalg.lstsq(Z, yj, rcond=None)
        fitted = Z @ beta
        ss_tot = float(np.sum((yj - yj.mean()) ** 2))
        ss_res = float(np.sum((yj - fitted) ** 2))
        if ss_tot == 0.0:
            raise ValueError(f"column {data.labels[j]!r} is constant")
        r2 = 1.0 - ss_res / ss_tot
        if r2 >= 1.0 - 1e-12:
            partner = _most_collinear_partner(X, j)
            raise ValueError(
                f"exact collinearity: column {data.labels[j]!r} is a linear "
                f"combination of the others (closest partner {data.labels[partner]!r}); "
                f"VIF is infinite")
        out[data.labels[j]] = 1.0 / (1.0 - r2)
    return out


def _most_collinear_partner(X: np.ndarray, j: int) -> int:
    c = np.corrcoef(X, rowvar=False)[j]
    c[j] = 0.0
    return int(np.argmax(np.abs(c)))


def condition_ratio(data: Dataset) -> float:
    """Largest over smallest eigenvalue of X'X (symmetric eigensolver)."""
    gram = data.X.T @ data.X
    ev = np.linalg.eigvalsh(gram)
    if ev[0] <= 0:
        raise ValueError("X'X is not positive definite")
    return float(ev[-1] / ev[0])


def outlier_test(data: Dataset, alpha: float = 0.05) -> list[dict]:
    """Bonferroni-adjusted externally studentized residual test.

    Returns the flagged observations as dicts with index (0-based),
    studentized residual and adjusted p-value, sorted by severity.
    """
    fit = fit_ols(data)
    Z = np.column_stack([np.ones(data.n), data.X]) if data.intercept else data.X
    n, k = Z.shape
    if n <= k + 1:
        raise ValueError("too few observations for studentized residuals")
    H = Z @ np.linalg.solve(Z.T @ Z, Z.T)
    h = np.clip(np.diag(H), 0.0, 1.0 - 1e-12)
    r = fit.residuals
    s2 = float(r @ r) / (n - k)
    # leave-one-out variance via the standard identity
    s2_i = (s2 * (n - k) - r ** 2 / (1.0 - h)) / (n - k - 1)
    s2_i = np.maximum(s2_i, 1e-300)
    t_stat = r / np.sqrt(s2_i * (1.0 - h))
    p = 2.0 * t_dist.sf(np.abs(t_stat), n - k - 1)
    p_adj = np.minimum(p * n, 1.0)
    flagged = [
        {"index": int(i), "studentized": float(t_stat[i]), "p_adjusted": float(p_adj[i])}
        for i in np.flatnonzero(p_adj < alpha)
    ]
    flagged.sort(key=lambda d: d["p_adjusted"])
    return flagged


def diagnose(data: Dataset, *, max_lag: int = 6, acf_lags: int = 20,
             n_permutations: int = 2000, seed: int = 0) -> DiagnosticsReport:
    """Full battery on the OLS residuals of the dataset."""
    fit = fit_ols(data)
    report = DiagnosticsReport()
    for lag in range(1, max_lag + 1):
        rho, dw, p = durbin_watson(fit.residuals, lag,
                                   n_permutations=n_permutations, seed=seed)
        report.dw_rows.append({"lag": lag, "autocorrelation": rho,
                               "dw": dw, "p_value": p})
    if data.p >= 2:
        report.vif = vif(data)
    report.condition_ratio = condition_ratio(data)
    report.outliers = outlier_test(data)
    report.acf = acf(fit.residuals, min(acf_lags, data.n - 1))
    return report
