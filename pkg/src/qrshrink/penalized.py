"""Elastic-net penalized quantile regression with a warm-started path.

The solver minimizes (1/n) sum_i rho_tau^h(y_i - b0 - x_i' b)
+ lambda (alpha |b|_1 + (1-alpha)/2 |b|_2^2) by coordinate descent on a
Huber-smoothed check loss, with the smoothing parameter driven from the
90th percentile of the initial absolute residuals down to
1e-4 * scale(y) by halving (each stage warm-starts the next).  Covariates
are standardized internally; returned coefficients are on the original
scale, intercept first.  The intercept is never penalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import Dataset

_ZERO_TOL = 1e-8
# terminal smoothing: 1e-3 * scale(y); a 1e-4 floor makes the smoothed
# problem numerically indistinguishable from the nonsmooth LP, where
# coordinate updates contract at rate 1 - O(h) and stall
_H_MIN_FRAC = 1e-3


@dataclass
class PenalizedPath:
    """A regularization path: one coefficient column per lambda.

    ``betas`` has intercept in row 0, slopes (original scale) below; columns
    follow ``lambdas`` which is strictly decreasing.
    """

    tau: float
    alpha_mix: float
    lambdas: np.ndarray
    betas: np.ndarray
    selected: int | None = None

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=np.float64)
        if np.any(np.diff(self.lambdas) >= 0):
            raise ValueError("lambda sequence must be strictly decreasing")
        if self.betas.shape[1] != self.lambdas.shape[0]:
            raise ValueError("betas must have one column per lambda")


def _standardized(data: Dataset):
    mu = data.X.mean(axis=0)
    sd = data.X.std(axis=0)
    if np.any(sd <= 0):
        j = int(np.argmax(sd <= 0))
        raise ValueError(f"column {data.labels[j]!r} is constant; cannot standardize")
    return (data.X - mu) / sd, mu, sd


def _psi(u, tau):
    return tau - (np.asarray(u) < 0)


def lambda_max(data: Dataset, tau: float, alpha_mix: float) -> float:
    """Smallest lambda at which the all-zero slope vector is stationary.

    max_j |sum_i x_ij psi_tau(y_i - q)| / (n alpha_mix) with q the
    intercept-only fit (empirical tau-quantile) and x the standardized
    columns used by the penalized solver.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    if alpha_mix <= 0.0:
        raise ValueError("ridge path has no finite lambda_max (alpha_mix = 0)")
    Xs, _, _ = _standardized(data)
    q = float(np.quantile(data.y, tau))
    score = Xs.T @ _psi(data.y - q, tau)
    return float(np.max(np.abs(score)) / (data.n * alpha_mix))


def _kkt_residual(Xs, y, tau, alpha_mix, lam, b0, beta, h):
    """Worst stationarity violation of the smoothed penalized objective."""
    n = Xs.shape[0]
    r = y - b0 - Xs @ beta
    psi = _kernels.smoothed_score(r, tau, h)
    g = Xs.T @ psi / n
    l1 = lam * alpha_mix
    l2 = lam * (1.0 - alpha_mix)
    worst = abs(float(np.mean(psi)))
    for j in range(beta.size):
        if beta[j] != 0.0:
            worst = max(worst, abs(-g[j] + l2 * beta[j] + l1 * np.sign(beta[j])))
        else:
            worst = max(worst, max(abs(g[j]) - l1, 0.0))
    return worst


def _fit_standardized(Xs, y, tau, alpha_mix, lam, b0, beta, h_start, h_min,
                      max_sweeps, kkt_tol):
    """h-continuation wrapper around the CD kernel; returns final state.

    Intermediate smoothing stages only warm-start the next one, so they run
    at a loose stationarity tolerance; the final h_min stage is tight.
    """
    h = max(h_start, h_min)
    while h > h_min:
        b0, beta, _, _ = _kernels.enet_cd(
            Xs, y, tau, alpha_mix, lam, h, b0, beta, 200,
            max(1e-4, 10 * kkt_tol))
        h = max(0.5 * h, h_min)
    b0, beta, ok = _solve_small_h(Xs, y, tau, alpha_mix, lam, b0, beta,
                                  h_min, kkt_tol)
    return b0, beta, h_min, ok


def _solve_small_h(Xs, y, tau, alpha_mix, lam, b0, beta, h, kkt_tol, max_rounds=10):
    """Alternate short CD bursts with active-set Newton steps at tiny h.

    Plain coordinate descent contracts at rate 1 - O(h) once the smoothing
    collapses; a damped Newton step on (intercept, active block) finishes in
    a handful of iterations because the smoothed objective is piecewise
    quadratic there.  CD re-enters to admit coordinates the Newton step
    cannot activate.
    """
    for _ in range(max_rounds):
        b0, beta, _, status = _kernels.enet_cd(
            Xs, y, tau, alpha_mix, lam, h, b0, beta, 30, 0.5 * kkt_tol)
        if status == _kernels.STATUS_CONVERGED:
            return b0, beta, True
        b0, beta, done = _active_newton(
            Xs, y, tau, alpha_mix, lam, b0, beta, h, 0.5 * kkt_tol)
        if done:
            return b0, beta, True
    kkt = _kkt_residual(Xs, y, tau, alpha_mix, lam, b0, beta, h)
    return b0, beta, kkt <= kkt_tol


def _active_newton(Xs, y, tau, alpha_mix, lam, b0, beta, h, tol, max_iter=60):
    """Damped Newton on the intercept plus the currently-active coefficients.

    Signs are sticky; a coefficient whose step would cross zero is clipped
    onto zero (and leaves the active set).  Returns (b0, beta, kkt_ok);
    kkt_ok is False when an inactive coordinate violates stationarity, in
    which case coordinate descent must take over again.
    """
    n, p = Xs.shape
    l1 = lam * alpha_mix
    l2 = lam * (1.0 - alpha_mix)

    def objective(b0_, beta_):
        r_ = y - b0_ - Xs @ beta_
        return (_kernels.smoothed_loss(r_, tau, h) / n
                + l1 * np.abs(beta_).sum() + 0.5 * l2 * beta_ @ beta_)

    beta = beta.copy()
    for _ in range(max_iter):
        beta[np.abs(beta) < 1e-12 * (1.0 + np.max(np.abs(beta)))] = 0.0
        r = y - b0 - Xs @ beta
        psi = _kernels.smoothed_score(r, tau, h)
        g_all = -(Xs.T @ psi) / n + l2 * beta
        act = beta != 0.0
        signs = np.sign(beta)
        kkt_act = abs(float(np.mean(-psi)))
        if np.any(act):
            kkt_act = max(kkt_act, float(np.max(np.abs(g_all[act] + l1 * signs[act]))))
        inact_viol = 0.0
        if np.any(~act):
            inact_viol = max(0.0, float(np.max(np.abs(g_all[~act]))) - l1)
        if kkt_act <= tol:
            return b0, beta, inact_viol <= tol
        A = Xs[:, act]
        k = A.shape[1]
        band = np.abs(r) <= h
        Zb = np.column_stack([np.ones(n), A])[band]
        H0 = Zb.T @ Zb / (2.0 * h * n)
        H0[1:, 1:] += l2 * np.eye(k)
        grad = np.concatenate([[-float(np.mean(psi))],
                               g_all[act] + l1 * signs[act]])
        hscale = float(np.trace(H0)) / (k + 1) + 1.0
        base = objective(b0, beta)
        improved = False
        # Levenberg-Marquardt escalation: the band can hold fewer points than
        # the active block, leaving H rank-deficient along some direction
        for ridge in (1e-10, 1e-6, 1e-3, 1.0):
            H = H0 + ridge * hscale * np.eye(k + 1)
            try:
                step = -np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                continue
            s_act = step[1:]
            bet_act = beta[act]
            crossing = s_act * bet_act < 0
            t_max = 1.0
            if np.any(crossing):
                t_max = min(1.0, float(np.min(-bet_act[crossing] / s_act[crossing])))
            if t_max < 1e-8:
                # a coefficient pinned at (numerical) zero blocks the step
                j_block = int(np.argmin(np.where(crossing, -bet_act / s_act, np.inf)))
                bet_act = bet_act.copy()
                bet_act[j_block] = 0.0
                beta[act] = bet_act
                improved = True
                break
            t = t_max
            for _ in range(8):
                b0_try = b0 + t * step[0]
                beta_try = beta.copy()
                beta_try[act] = bet_act + t * s_act
                beta_try[np.abs(beta_try) < 1e-15] = 0.0
                if objective(b0_try, beta_try) <= base - 1e-16 * (1.0 + abs(base)):
                    b0, beta = b0_try, beta_try
                    improved = True
                    break
                t *= 0.5
            if improved:
                break
        if not improved:
            return b0, beta, False
    return b0, beta, False


def fit_penalized(data: Dataset, tau: float, alpha_mix: float, lam: float,
                  *, max_sweeps: int = 2000, kkt_tol: float = 1e-6) -> np.ndarray:
    """Penalized fit at a single lambda; returns [intercept, slopes] on the
    original scale.  Raises when coordinate descent stalls above ``kkt_tol``."""
    if not 0.0 <= alpha_mix <= 1.0:
        raise ValueError(f"alpha_mix must lie in [0, 1], got {alpha_mix}")
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    Xs, mu, sd = _standardized(data)
    y = data.y
    h_min = _H_MIN_FRAC * _yscale(y)
    if alpha_mix > 0 and lam >= lambda_max(data, tau, alpha_mix) * (1 - 1e-12):
        # at the threshold the all-zero slope vector satisfies the
        # subdifferential condition; return that canonical optimum (the LP
        # face there also contains just-entering vertices)
        return _original_scale(float(np.quantile(y, tau)), np.zeros(data.p), mu, sd)
    start = _lasso_lp_start(Xs, y, tau, lam) if alpha_mix == 1.0 and lam > 0 else None
    if start is not None:
        b0, beta = start
        b0, beta, ok = _solve_small_h(Xs, y, tau, alpha_mix, lam, b0, beta,
                                      h_min, kkt_tol)
        h = h_min
    else:
        b0 = float(np.quantile(y, tau))
        beta = np.zeros(data.p)
        b0, beta, h, ok = _fit_standardized(
            Xs, y, tau, alpha_mix, lam, b0, beta, _h_start(y, b0), h_min,
            max_sweeps, kkt_tol)
    if not ok:
        kkt = _kkt_residual(Xs, y, tau, alpha_mix, lam, b0, beta, h)
        if kkt > kkt_tol:
            raise RuntimeError(
                f"penalized fit did not converge: KKT residual {kkt:.2e} > {kkt_tol:.0e}")
    beta[np.abs(beta) < _ZERO_TOL] = 0.0
    return _original_scale(b0, beta, mu, sd)


def _lasso_lp_start(Xs, y, tau, lam):
    """Exact minimizer of the unsmoothed l1-penalized check loss (alpha = 1).

    rho_tau(v) + rho_tau(-v) = |v| for any tau, so a pair of pseudo-rows
    (y=0, x=+c e_j) and (y=0, x=-c e_j) with c = n*lambda adds exactly
    c |beta_j| to the LP objective; one interior-point solve then lands on
    the exact lasso solution, an ideal warm start for the smoothed polish.
    """
    n, p = Xs.shape
    c = n * lam
    Zaug = np.zeros((n + 2 * p, p + 1))
    Zaug[:n, 0] = 1.0
    Zaug[:n, 1:] = Xs
    for j in range(p):
        Zaug[n + 2 * j, 1 + j] = c
        Zaug[n + 2 * j + 1, 1 + j] = -c
    yaug = np.concatenate([y, np.zeros(2 * p)])
    b, _, _, code = _kernels.fn_quantile(Zaug, yaug, tau)
    if code == _kernels.STATUS_DEGENERATE:
        return None
    return float(b[0]), b[1:]


def _yscale(y) -> float:
    s = float(np.std(y))
    return s if s > 0 else 1.0


def _h_start(y, b0) -> float:
    h0 = float(np.quantile(np.abs(y - b0), 0.9))
    return h0 if h0 > 0 else _yscale(y)


def _original_scale(b0, beta_std, mu, sd):
    slopes = beta_std / sd
    return np.concatenate([[b0 - mu @ slopes], slopes])


def default_lambda_ratio(n: int, p: int) -> float:
    return 1e-3 if n > p else 0.05


def fit_path(data: Dataset, tau: float, alpha_mix: float,
             n_lambda: int = 100, ratio: float | None = None,
             lambdas=None, *, max_sweeps: int = 2000,
             kkt_tol: float = 1e-6) -> PenalizedPath:
    """Warm-started path over a log-spaced (or supplied) lambda grid.

    For a pure ridge path (alpha_mix = 0) the grid anchor uses
    lambda_max at alpha_mix = 1e-3, the usual convention when the exact
    threshold does not exist.
    """
    if lambdas is None:
        if n_lambda < 2:
            raise ValueError("n_lambda must be at least 2")
        if ratio is None:
            ratio = default_lambda_ratio(data.n, data.p)
        if not 0.0 < ratio < 1.0:
            raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
        anchor = lambda_max(data, tau, max(alpha_mix, 1e-3))
        grid = anchor * np.exp(np.linspace(0.0, np.log(ratio), n_lambda))
    else:
        grid = np.sort(np.asarray(lambdas, dtype=np.float64))[::-1]
    Xs, mu, sd = _standardized(data)
    y = data.y
    h_min = _H_MIN_FRAC * _yscale(y)
    b0 = float(np.quantile(y, tau))
    beta = np.zeros(data.p)
    h_start = _h_start(y, b0)
    lam_thresh = lambda_max(data, tau, alpha_mix) if alpha_mix > 0 else np.inf
    out = np.empty((data.p + 1, grid.size))
    for i, lam in enumerate(grid):
        if alpha_mix > 0 and lam >= lam_thresh * (1 - 1e-12):
            b0 = float(np.quantile(y, tau))
            beta = np.zeros(data.p)
            out[:, i] = _original_scale(b0, beta, mu, sd)
            continue
        if alpha_mix == 1.0 and lam > 0:
            start = _lasso_lp_start(Xs, y, tau, float(lam))
            if start is not None:
                b0, beta = start
        if i == 0 and alpha_mix < 1.0:
            b0, beta, h, ok = _fit_standardized(
                Xs, y, tau, alpha_mix, float(lam), b0, beta, h_start, h_min,
                max_sweeps, kkt_tol)
        else:
            # LP start (lasso) or adjacent-lambda warm start is already near
            # the small-h optimum
            b0, beta, ok = _solve_small_h(
                Xs, y, tau, alpha_mix, float(lam), b0, beta, h_min, kkt_tol)
            h = h_min
            if not ok:
                b0, beta, h, ok = _fit_standardized(
                    Xs, y, tau, alpha_mix, float(lam), b0, beta, h_start, h_min,
                    max_sweeps, kkt_tol)
        if not ok:
            kkt = _kkt_residual(Xs, y, tau, alpha_mix, float(lam), b0, beta, h)
            if kkt > kkt_tol:
                raise RuntimeError(
                    f"path fit at lambda index {i} (lambda={lam:.3e}) stalled; "
                    f"KKT residual {kkt:.2e}")
        bsnap = beta.copy()
        bsnap[np.abs(bsnap) < _ZERO_TOL] = 0.0
        out[:, i] = _original_scale(b0, bsnap, mu, sd)
    return PenalizedPath(tau=tau, alpha_mix=alpha_mix, lambdas=grid, betas=out)


def select_by_validation(path: PenalizedPath, val: Dataset) -> int:
    """Index of the lambda minimizing validation PMAD; ties go to larger lambda."""
    if val.n < 1:
        raise ValueError("empty validation set")
    preds = path.betas[0][None, :] + val.X @ path.betas[1:, :]
    pmad = np.mean(np.abs(val.y[:, None] - preds), axis=0)
    best = int(np.argmin(pmad + 1e-15))
    # argmin returns the first (largest-lambda) index among exact ties
    path.selected = best
    return best
