"""Asymptotic covariance ingredients for quantile regression under autocorrelation.

Estimates the design moment D0, the long-run score covariance A (Bartlett
HAC), the sparsity scale omega^2 = tau(1-tau)/f^2, and the sandwich
Gamma = D0^-1 A D0^-1 with its partition blocks and Schur complement.

The Wald statistic downstream needs the *precision* of the tested
sub-vector.  Because Gamma is a covariance-flavored sandwich, that
precision is tau(1-tau) * inverse of the (2,2) block of Gamma, not the
Schur complement of Gamma itself; ``CovarianceEstimate`` carries both
(``gamma_22_1`` for the Schur complement, ``test_precision`` for the
calibrated Wald weight).  The two coincide only when Gamma is block
diagonal; using the Schur complement as the weight would not be
chi-square calibrated nor invariant under reparameterizations of the
tested columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .data import Dataset, PartitionSpec
from .solver import QuantileFit


@dataclass
class CovarianceEstimate:
    """Covariance ingredients under a fixed partition and quantile level."""

    tau: float
    d0: np.ndarray
    a_hat: np.ndarray
    omega_sq: float
    f_hat: float
    gamma: np.ndarray
    g11: np.ndarray
    g12: np.ndarray
    g21: np.ndarray
    g22: np.ndarray
    gamma_22_1: np.ndarray
    test_precision: np.ndarray
    bandwidth: int
    partition: PartitionSpec
    d1: np.ndarray | None = None
    condition_number: float = np.nan


def design_matrix(data: Dataset) -> np.ndarray:
    """The matrix actually used in fits: intercept column first when present."""
    if data.intercept:
        return np.column_stack([np.ones(data.n), data.X])
    return data.X


def estimate_D0(data: Dataset) -> np.ndarray:
    """(1/n) Z'Z over the fitted design (including the intercept column)."""
    Z = design_matrix(data)
    return Z.T @ Z / data.n


def hall_sheather_bandwidth(n: int, tau: float) -> float:
    """Hall-Sheather rate-n^(-1/3) bandwidth for quantile density estimation."""
    z = norm.ppf(0.975)
    q = norm.ppf(tau)
    return float(n ** (-1 / 3) * z ** (2 / 3)
                 * (1.5 * norm.pdf(q) ** 2 / (2 * q ** 2 + 1)) ** (1 / 3))


def _density_at_quantile(residuals: np.ndarray, tau: float, drop_smallest: int) -> float:
    r = np.asarray(residuals, dtype=np.float64)
    if drop_smallest > 0:
        if drop_smallest >= r.size:
            raise ValueError("sparsity estimation failed: no residuals left")
        r = r[np.argsort(np.abs(r))[drop_smallest:]]
    n = r.size
    h = hall_sheather_bandwidth(n, tau)
    lo = max(tau - h, 1e-3)
    hi = min(tau + h, 1.0 - 1e-3)
    if hi <= lo:
        raise ValueError("sparsity estimation failed: empty bandwidth window")
    spread = float(np.quantile(r, hi) - np.quantile(r, lo))
    f = (hi - lo) / spread if spread > 0 else np.inf
    if not np.isfinite(f) or f <= 1e-12 or spread <= 0:
        raise ValueError("sparsity estimation failed")
    return f


def estimate_sparsity(residuals, tau: float, *, drop_smallest: int = 0) -> float:
    """Sparsity scale omega^2 = tau(1-tau)/f^2 with f a difference-quotient
    density estimate at the tau-quantile (Hall-Sheather bandwidth).

    ``drop_smallest`` removes that many smallest-|r| residuals first; fits
    interpolate as many points as they have free coefficients, and those
    exact zeros are artifacts, not draws from the error law.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    r = np.asarray(residuals, dtype=np.float64)
    if r.size < 20:
        raise ValueError("need at least 20 residuals for sparsity estimation")
    if np.ptp(r) == 0.0:
        raise ValueError("sparsity estimation failed: residuals are constant")
    f = _density_at_quantile(r, tau, drop_smallest)
    return float(tau * (1.0 - tau) / f ** 2)


def newey_west_lags(n: int) -> int:
    """Default Bartlett lag truncation floor(4 (n/100)^(2/9))."""
    return int(np.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def estimate_A_hac(data: Dataset, residuals, tau: float,
                   bandwidth: int | None = None) -> tuple[np.ndarray, int]:
    """Bartlett-kernel long-run covariance of the quantile score process.

    A_hat = sum_{|l|<=L} (1 - |l|/(L+1)) (1/n) sum_i psi(r_i) psi(r_{i+l})
    z_i z_{i+l}', with psi(e) = tau - 1[e<0]; symmetric PSD by construction.
    """
    r = np.asarray(residuals, dtype=np.float64)
    Z = design_matrix(data)
    n = Z.shape[0]
    if r.shape[0] != n:
        raise ValueError("residuals length does not match the dataset")
    L = newey_west_lags(n) if bandwidth is None else int(bandwidth)
    if L < 0:
        raise ValueError("bandwidth must be nonnegative")
    if L >= n:
        raise ValueError(f"bandwidth {L} must be below n={n}")
    # residuals interpolated by the fit are zeros up to solver noise; pin
    # their score to psi(0) = tau so A_hat does not depend on that noise
    ztol = 1e-9 * (1.0 + float(np.max(np.abs(data.y))))
    psi = tau - (r < -ztol)
    U = Z * psi[:, None]
    A = U.T @ U / n
    for lag in range(1, L + 1):
        w = 1.0 - lag / (L + 1.0)
        G = U[lag:].T @ U[:-lag] / n
        A += w * (G + G.T)
    return 0.5 * (A + A.T), L


def estimate_D1(data: Dataset, residuals, tau: float) -> np.ndarray:
    """Density-weighted design moment (condition (ii)); housed, not used in tests.

    Uses a common Gaussian-kernel density estimate of the residuals at zero,
    the location of the fitted tau-quantile.
    """
    r = np.asarray(residuals, dtype=np.float64)
    n = r.size
    bw = 1.06 * np.std(r) * n ** (-1 / 5)
    if bw <= 0:
        raise ValueError("degenerate residuals for D1 estimation")
    f0 = float(np.mean(norm.pdf(r / bw)) / bw)
    Z = design_matrix(data)
    return f0 * (Z.T @ Z / n)


def _partition_columns(partition: PartitionSpec, p: int, intercept: bool):
    """Map covariate indices to design-matrix columns; intercept joins block 1."""
    partition.validate_for(p)
    off = 1 if intercept else 0
    block1 = ([0] if intercept else []) + [j + off for j in partition.keep_idx]
    block2 = [j + off for j in partition.test_idx]
    return block1, block2


def build_gamma(d0: np.ndarray, a_hat: np.ndarray, partition: PartitionSpec,
                *, tau: float, omega_sq: float, intercept: bool = True,
                bandwidth: int = 0) -> CovarianceEstimate:
    """Assemble Gamma = D0^-1 A D0^-1, its blocks, Schur complement, and the
    calibrated test-block precision."""
    d0 = np.asarray(d0, dtype=np.float64)
    k = d0.shape[0]
    cond = float(np.linalg.cond(d0))
    if not np.isfinite(cond) or cond > 1e15:
        raise ValueError("singular D0")
    off = 1 if intercept else 0
    p = k - off
    b1, b2 = _partition_columns(partition, p, intercept)
    if not b1:
        raise ValueError("the kept block is empty and there is no intercept; "
                         "Gamma_11 would be degenerate")

    d0_inv = np.linalg.inv(d0)
    gamma = d0_inv @ a_hat @ d0_inv
    gamma = 0.5 * (gamma + gamma.T)
    g11 = gamma[np.ix_(b1, b1)]
    g12 = gamma[np.ix_(b1, b2)]
    g21 = gamma[np.ix_(b2, b1)]
    g22 = gamma[np.ix_(b2, b2)]
    try:
        g11_inv_g12 = np.linalg.solve(g11, g12)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular Gamma_11 block") from exc
    gamma_22_1 = g22 - g21 @ g11_inv_g12
    gamma_22_1 = 0.5 * (gamma_22_1 + gamma_22_1.T)

    # precision of sqrt(n) * beta2_hat: its covariance is Gamma_22 / (tau(1-tau)) * omega^2,
    # so the omega^-2-normalized Wald weight is tau(1-tau) * Gamma_22^-1
    test_precision = tau * (1.0 - tau) * np.linalg.inv(g22)
    test_precision = 0.5 * (test_precision + test_precision.T)

    f_hat = float(np.sqrt(tau * (1.0 - tau) / omega_sq))
    return CovarianceEstimate(
        tau=float(tau), d0=d0, a_hat=np.asarray(a_hat, dtype=np.float64),
        omega_sq=float(omega_sq), f_hat=f_hat, gamma=gamma,
        g11=g11, g12=g12, g21=g21, g22=g22, gamma_22_1=gamma_22_1,
        test_precision=test_precision, bandwidth=bandwidth,
        partition=partition, condition_number=cond)


def estimate_covariance(data: Dataset, fit: QuantileFit, partition: PartitionSpec,
                        *, bandwidth: int | None = None,
                        sparsity_fits: tuple[QuantileFit, ...] | None = None,
                        with_d1: bool = False) -> CovarianceEstimate:
    """Full pipeline from a fitted model to the covariance estimate.

    The sparsity scale is, by default, the average of the difference-quotient
    estimates over ``sparsity_fits`` (falling back to ``fit`` alone); passing
    both the full and the sub-model fit pools two estimates of the same
    density and stabilizes the small-sample Wald statistic.  Each fit's
    interpolated zero residuals are dropped before its quantile window.
    """
    tau = fit.tau
    fits = sparsity_fits if sparsity_fits else (fit,)
    fs = []
    for qf in fits:
        if qf.partition is not None:
            n_free = len(qf.partition.keep_idx) + (1 if qf.intercept else 0)
        else:
            n_free = qf.beta.size
        fs.append(_density_at_quantile(qf.residuals, tau, drop_smallest=max(n_free, 1)))
    f_hat = float(np.mean(fs))
    omega_sq = tau * (1.0 - tau) / f_hat ** 2

    d0 = estimate_D0(data)
    a_hat, L = estimate_A_hac(data, fit.residuals, tau, bandwidth)
    cov = build_gamma(d0, a_hat, partition, tau=tau, omega_sq=omega_sq,
                      intercept=data.intercept, bandwidth=L)
    if with_d1:
        cov.d1 = estimate_D1(data, fit.residuals, tau)
    return cov
