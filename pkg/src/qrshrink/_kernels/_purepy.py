"""Pure-NumPy implementations of the two hot kernels.

These mirror the compiled versions in ``_core.pyx`` operation for operation;
they are selected at import time when the extension is unavailable (or when
``QRSHRINK_PURE_PYTHON=1``).  Keep the two files in sync: the test suite
asserts that both backends agree on random instances.
"""

import numpy as np

STATUS_CONVERGED = 0
STATUS_ITER_LIMIT = 1
STATUS_DEGENERATE = 2


def fn_quantile(X, y, tau, tol=1e-10, max_iter=200):
    """Frisch-Newton interior-point solver for the check-loss LP.

    Solves min_b sum_i rho_tau(y_i - x_i'b) through its bounded-variables
    dual  max { y'a : X'a = (1-tau) X'1, 0 <= a <= 1 }  with a Mehrotra
    predictor-corrector iteration.

    Parameters
    ----------
    X : (n, k) design, full column rank for a clean exit.
    y : (n,) response.
    tau : quantile level in (0, 1).
    tol : duality-gap tolerance, relative to the objective scale.
    max_iter : iteration cap.

    Returns
    -------
    beta : (k,) coefficient vector.
    a : (n,) dual solution in [0, 1].
    n_iter : iterations used.
    status : STATUS_* code.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, k = X.shape
    big = 0.9995

    a = np.full(n, 1.0 - tau)
    b_eq = X.T @ a  # (1-tau) X'1, stays the target throughout

    gram = X.T @ X
    jitter = 1e-12 * (np.trace(gram) / max(k, 1) + 1.0)
    try:
        beta = np.linalg.solve(gram + jitter * np.eye(k), X.T @ y)
    except np.linalg.LinAlgError:
        return np.zeros(k), a, 0, STATUS_DEGENERATE

    r = y - X @ beta
    scale = np.max(np.abs(y)) + 1.0
    eps0 = 1e-4 * scale + 1e-8
    v = np.maximum(r, 0.0) + eps0   # multiplier for a <= 1
    z = np.maximum(-r, 0.0) + eps0  # multiplier for a >= 0

    status = STATUS_ITER_LIMIT
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        s = 1.0 - a
        gap = z @ a + v @ s
        obj = np.sum(r * (tau - (r < 0.0)))
        dual_obj = y @ a - (1.0 - tau) * np.sum(y)
        rp = b_eq - X.T @ a
        rd = r - v + z
        if (gap <= tol * (1.0 + abs(obj))
                and np.max(np.abs(rp)) <= tol * scale * max(n, 1)
                and abs(obj - dual_obj) <= 1e-8 * (1.0 + abs(obj))):
            status = STATUS_CONVERGED
            break

        q = z / a + v / s
        qinv = 1.0 / q

        # affine predictor; with g = tz/a - tv/s - z + v + rd the affine rhs is just r
        lhs = X.T @ (qinv[:, None] * X)
        try:
            g_aff = -z + v + rd
            arhs = X.T @ (qinv * g_aff) - rp
            dbeta = np.linalg.solve(lhs, arhs)
        except np.linalg.LinAlgError:
            return beta, a, n_iter, STATUS_DEGENERATE
        da = qinv * (-(X @ dbeta) + g_aff)
        dz = -z - (z / a) * da
        dv = -v + (v / s) * da

        ap = _step_box(a, da, big)
        ad = _step_pos(z, dz, v, dv, big)
        gap_aff = (z + ad * dz) @ (a + ap * da) + (v + ad * dv) @ (1.0 - a - ap * da)
        mu = (max(gap_aff, 0.0) / gap) ** 3 * gap / (2.0 * n) if gap > 0 else 0.0

        # corrector: complementarity targets a.z = mu - da.dz, s.v = mu + da.dv
        tz = mu - da * dz
        tv = mu + da * dv
        g_cor = tz / a - tv / s - z + v + rd
        arhs = X.T @ (qinv * g_cor) - rp
        dbeta = np.linalg.solve(lhs, arhs)
        da = qinv * (-(X @ dbeta) + g_cor)
        dz = tz / a - z - (z / a) * da
        dv = tv / s - v + (v / s) * da

        ap = _step_box(a, da, big)
        ad = _step_pos(z, dz, v, dv, big)
        al = min(ap, ad)
        a = a + al * da
        z = z + al * dz
        v = v + al * dv
        beta = beta + al * dbeta
        r = y - X @ beta
        np.clip(a, 1e-14, 1.0 - 1e-14, out=a)
        z = np.maximum(z, 1e-14)
        v = np.maximum(v, 1e-14)

    return beta, a, n_iter, status


def _step_box(a, da, big):
    """Largest step keeping a + t*da inside (0, 1), damped by ``big``."""
    t = 1.0
    neg = da < 0
    if np.any(neg):
        t = min(t, big * np.min(-a[neg] / da[neg]))
    pos = da > 0
    if np.any(pos):
        t = min(t, big * np.min((1.0 - a[pos]) / da[pos]))
    return t


def _step_pos(z, dz, v, dv, big):
    """Largest step keeping z, v positive, damped by ``big``."""
    t = 1.0
    neg = dz < 0
    if np.any(neg):
        t = min(t, big * np.min(-z[neg] / dz[neg]))
    neg = dv < 0
    if np.any(neg):
        t = min(t, big * np.min(-v[neg] / dv[neg]))
    return t


def smoothed_loss(r, tau, h):
    """Huber-smoothed check loss, summed.  Bias vs the exact loss is <= h/4 per point."""
    u = np.asarray(r, dtype=np.float64)
    absu = np.abs(u)
    quad = u * u / (4.0 * h)
    lin = absu / 2.0 - h / 4.0
    return float(np.sum((tau - 0.5) * u + np.where(absu <= h, quad, lin)))


def smoothed_score(r, tau, h):
    """Derivative of the smoothed check loss: tau - 1/2 + clip(u/h,-1,1)/2."""
    return (tau - 0.5) + 0.5 * np.clip(r / h, -1.0, 1.0)


def enet_cd(X, y, tau, alpha_mix, lam, h, b0, beta, max_sweeps=500, tol=1e-8):
    """Semismooth-Newton coordinate descent at fixed smoothing h.

    Minimizes (1/n) sum rho_tau^h(y - b0 - X beta) + lam * P_alpha(beta)
    with the intercept unpenalized.  Each coordinate takes a Newton step
    with the local curvature of the smoothed loss; whenever that step would
    increase the objective it falls back to the global-curvature
    majorize-minimize step (curvature bound 1/(2h)), so sweeps never
    increase the objective.  ``tol`` is the KKT stationarity tolerance.
    X columns are expected standardized.

    Returns
    -------
    b0, beta, sweeps, status
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    beta = beta.copy()
    r = y - b0 - X @ beta
    colsq = np.einsum("ij,ij->j", X, X) / n
    l1 = lam * alpha_mix
    l2 = lam * (1.0 - alpha_mix)
    status = STATUS_ITER_LIMIT
    sweeps = 0
    inv2h = 1.0 / (2.0 * h)

    def pen(b):
        return l1 * abs(b) + 0.5 * l2 * b * b

    for sweeps in range(1, max_sweeps + 1):
        # intercept step
        psi = smoothed_score(r, tau, h)
        g0 = -float(np.mean(psi))
        band = np.abs(r) <= h
        c0 = max(float(np.mean(band)) * inv2h, inv2h / n)
        step = -g0 / c0
        obj0 = smoothed_loss(r, tau, h) / n
        if smoothed_loss(r - step, tau, h) / n > obj0 + 1e-14 * (1 + abs(obj0)):
            step = -g0 * 2.0 * h  # MM fallback, provably non-increasing
        b0 += step
        r -= step

        for j in range(p):
            xj = X[:, j]
            psi = smoothed_score(r, tau, h)
            gj = -float(xj @ psi) / n + l2 * beta[j]
            band = np.abs(r) <= h
            cj_loc = float((xj * xj) @ band) / n * inv2h + l2
            cj_mm = colsq[j] * inv2h + l2
            cj = cj_loc if cj_loc > 1e-12 else cj_mm
            if cj <= 0.0:
                continue
            target = beta[j] - gj / cj
            bnew = _soft(target, l1 / cj)
            d = bnew - beta[j]
            if d == 0.0:
                continue
            base = smoothed_loss(r, tau, h) / n + pen(beta[j])
            trial = smoothed_loss(r - d * xj, tau, h) / n + pen(bnew)
            if trial > base + 1e-14 * (1.0 + abs(base)) and cj != cj_mm:
                target = beta[j] - gj / cj_mm
                bnew = _soft(target, l1 / cj_mm)
                d = bnew - beta[j]
                if d == 0.0:
                    continue
            r -= d * xj
            beta[j] = bnew
        if _kkt(X, r, tau, h, beta, l1, l2) <= tol:
            status = STATUS_CONVERGED
            break
    return b0, beta, sweeps, status


def _kkt(X, r, tau, h, beta, l1, l2):
    """Worst stationarity violation of the smoothed penalized objective."""
    n = X.shape[0]
    psi = smoothed_score(r, tau, h)
    g = X.T @ psi / n
    worst = abs(float(np.mean(psi)))
    active = beta != 0.0
    if np.any(active):
        worst = max(worst, float(np.max(np.abs(
            -g[active] + l2 * beta[active] + l1 * np.sign(beta[active])))))
    if np.any(~active):
        worst = max(worst, float(np.max(np.abs(g[~active])) - l1), 0.0)
    return worst


def _soft(x, k):
    if x > k:
        return x - k
    if x < -k:
        return x + k
    return 0.0
