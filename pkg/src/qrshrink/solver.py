"""Exact check-loss minimization and the least-squares baseline.

The quantile fits go through a Frisch-Newton interior-point kernel on the
LP dual, followed by a cleanup step that lands on a basic (interpolating)
solution whenever that does not degrade the objective.  Optimality is
certified through the subgradient condition, and non-unique optima are
flagged rather than silently resolved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import Dataset, PartitionSpec

STATUS_CONVERGED = "converged"
STATUS_ITER_LIMIT = "iteration-limit"
STATUS_DEGENERATE = "degenerate"

_STATUS_NAMES = {
    _kernels.STATUS_CONVERGED: STATUS_CONVERGED,
    _kernels.STATUS_ITER_LIMIT: STATUS_ITER_LIMIT,
    _kernels.STATUS_DEGENERATE: STATUS_DEGENERATE,
}


def check_loss(u, tau: float):
    """Asymmetric absolute loss u * (tau - 1[u < 0]); vectorized over u."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    u = np.asarray(u, dtype=np.float64)
    out = u * (tau - (u < 0.0))
    return float(out) if out.ndim == 0 else out


@dataclass
class QuantileFit:
    """Result of an exact quantile (or least-squares) fit.

    ``beta`` always spans intercept + all p covariates (intercept first when
    present); coefficients in the tested block of a sub-model fit are exact
    zeros.  ``multiple_optima`` marks a non-singleton solution set.
    """

    tau: float
    beta: np.ndarray
    residuals: np.ndarray
    objective: float
    status: str
    intercept: bool = True
    partition: PartitionSpec | None = None
    basic: bool = False
    multiple_optima: bool = False
    n_iter: int = 0
    labels: list[str] = field(default_factory=list)

    @property
    def slopes(self) -> np.ndarray:
        return self.beta[1:] if self.intercept else self.beta


def _zero_tol(y: np.ndarray) -> float:
    return 1e-9 * (1.0 + float(np.max(np.abs(y))))


def _design(data: Dataset, free_cols) -> np.ndarray:
    cols = [data.X[:, j] for j in free_cols]
    if data.intercept:
        return np.column_stack([np.ones(data.n)] + cols)
    return np.column_stack(cols) if cols else np.empty((data.n, 0))


def subgradient_gap(Z: np.ndarray, resid: np.ndarray, tau: float, ztol: float) -> float:
    """Worst violation of the check-loss optimality condition over columns.

    For each column, |sum_{r!=0} z_ij psi_tau(r_i)| must not exceed
    max(tau, 1-tau) * sum_{r==0} |z_ij|; returns max_j of the excess.
    """
    at_zero = np.abs(resid) <= ztol
    psi = tau - (resid < 0.0)
    psi = np.where(at_zero, 0.0, psi)
    g = Z.T @ psi
    bound = max(tau, 1.0 - tau) * (np.abs(Z.T) @ at_zero.astype(np.float64))
    return float(np.max(np.abs(g) - bound, initial=0.0))


def _directional_slack(Z: np.ndarray, resid: np.ndarray, tau: float, ztol: float) -> float:
    """Smallest one-sided directional derivative over +-e_j directions.

    A zero slack in some direction means the optimum is a face, not a point.
    """
    at_zero = np.abs(resid) <= ztol
    psi = np.where(at_zero, 0.0, tau - (resid < 0.0))
    g = Z.T @ psi
    zero_mass = np.abs(Z.T) @ at_zero.astype(np.float64)
    # one-sided derivatives of the objective along +e_j / -e_j
    d_plus = -g + zero_mass * max(tau, 1.0 - tau)
    d_minus = g + zero_mass * max(tau, 1.0 - tau)
    if d_plus.size == 0:
        return np.inf
    return float(min(d_plus.min(), d_minus.min()))


def _vertex_polish(Z, y, tau, beta, objective, ztol):
    """Try to land on an interpolating basic solution without losing ground."""
    n, k = Z.shape
    if k == 0 or k > n:
        return beta, objective, False
    order = np.argsort(np.abs(y - Z @ beta))
    Zb = Z[order[:k]]
    try:
        beta_v = np.linalg.solve(Zb, y[order[:k]])
    except np.linalg.LinAlgError:
        return beta, objective, False
    if not np.all(np.isfinite(beta_v)):
        return beta, objective, False
    obj_v = float(np.sum(check_loss(y - Z @ beta_v, tau)))
    if obj_v <= objective + 1e-12 * (1.0 + abs(objective)):
        return beta_v, obj_v, True
    return beta, objective, False


def fit_quantile(data: Dataset, tau: float,
                 partition: PartitionSpec | None = None) -> QuantileFit:
    """Exact tau-th quantile regression, optionally with a tested block fixed at zero.

    With a partition, only the intercept and the kept columns are free; the
    returned ``beta`` still spans every column, test-block entries exactly 0.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    if partition is not None:
        partition.validate_for(data.p)
        free_cols = list(partition.keep_idx)
    else:
        free_cols = list(range(data.p))
    Z = _design(data, free_cols)
    n, k = Z.shape
    if n < k:
        raise ValueError(f"n={n} below the number of free coefficients {k}")
    if k == 0:
        resid = data.y.copy()
        return _assemble(data, tau, partition, free_cols, np.empty(0), resid,
                         float(np.sum(check_loss(resid, tau))),
                         STATUS_CONVERGED, basic=True, multi=False, iters=0)

    if np.linalg.matrix_rank(Z) < k:
        beta_f, *_ = np.linalg.lstsq(Z, data.y, rcond=None)
        resid = data.y - Z @ beta_f
        fit = _assemble(data, tau, partition, free_cols, beta_f, resid,
                        float(np.sum(check_loss(resid, tau))),
                        STATUS_DEGENERATE, basic=False, multi=True, iters=0)
        return fit

    beta_f, _a, iters, code = _kernels.fn_quantile(Z, data.y, tau)
    status = _STATUS_NAMES[code]
    resid = data.y - Z @ beta_f
    objective = float(np.sum(check_loss(resid, tau)))

    ztol = _zero_tol(data.y)
    beta_f, objective, basic = _vertex_polish(Z, data.y, tau, beta_f, objective, ztol)
    resid = data.y - Z @ beta_f

    if status != STATUS_DEGENERATE and subgradient_gap(Z, resid, tau, ztol) > 1e-7 * (1 + np.max(np.abs(Z))):
        status = STATUS_ITER_LIMIT
    multi = _directional_slack(Z, resid, tau, ztol) <= 1e-10 * (1.0 + np.max(np.abs(Z)))

    return _assemble(data, tau, partition, free_cols, beta_f, resid, objective,
                     status, basic, multi, iters)


def _assemble(data, tau, partition, free_cols, beta_free, resid, objective,
              status, basic, multi, iters) -> QuantileFit:
    off = 1 if data.intercept else 0
    beta = np.zeros(data.p + off)
    if data.intercept:
        beta[0] = beta_free[0]
    for pos, j in enumerate(free_cols):
        beta[j + off] = beta_free[pos + off]
    labels = (["(intercept)"] if data.intercept else []) + list(data.labels)
    return QuantileFit(tau=float(tau), beta=beta, residuals=resid,
                       objective=objective, status=status, intercept=data.intercept,
                       partition=partition, basic=basic, multiple_optima=multi,
                       n_iter=iters, labels=labels)


def fit_ols(data: Dataset) -> QuantileFit:
    """Least-squares baseline in the same result shape (tau slot holds 0.5)."""
    Z = _design(data, range(data.p))
    gram = Z.T @ Z
    labels = (["(intercept)"] if data.intercept else []) + list(data.labels)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e14:
        bad = _collinear_columns(Z, labels)
        raise ValueError(f"X'X is singular; offending columns: {bad}")
    beta = np.linalg.solve(gram, Z.T @ data.y)
    resid = data.y - Z @ beta
    return QuantileFit(tau=0.5, beta=beta, residuals=resid,
                       objective=float(resid @ resid), status=STATUS_CONVERGED,
                       intercept=data.intercept, basic=False,
                       multiple_optima=False, n_iter=1, labels=labels)


def _collinear_columns(Z: np.ndarray, labels) -> list[str]:
    """Name a minimal set of columns whose removal restores full rank."""
    bad = []
    rank = np.linalg.matrix_rank(Z)
    if rank == Z.shape[1]:
        return bad
    keep: list[int] = []
    for j in range(Z.shape[1]):
        if np.linalg.matrix_rank(Z[:, keep + [j]]) > len(keep):
            keep.append(j)
        else:
            bad.append(labels[j])
    return bad
