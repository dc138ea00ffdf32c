# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Frisch-Newton quantile LP and smoothed elastic-net CD.

Mirrors ``_purepy.py``; keep the two in sync.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, fmax, fmin

cnp.import_array()

STATUS_CONVERGED = 0
STATUS_ITER_LIMIT = 1
STATUS_DEGENERATE = 2


cdef int _chol_solve(double[:, ::1] A, double[::1] b, double[::1] x,
                     double[:, ::1] L, int k) nogil:
    """Solve A x = b for SPD A via Cholesky; returns 0 on success."""
    cdef int i, j, m
    cdef double s
    for i in range(k):
        for j in range(i + 1):
            s = A[i, j]
            for m in range(j):
                s -= L[i, m] * L[j, m]
            if i == j:
                if s <= 0.0:
                    return 1
                L[i, i] = s ** 0.5
            else:
                L[i, j] = s / L[j, j]
    for i in range(k):
        s = b[i]
        for m in range(i):
            s -= L[i, m] * x[m]
        x[i] = s / L[i, i]
    for i in range(k - 1, -1, -1):
        s = x[i]
        for m in range(i + 1, k):
            s -= L[m, i] * x[m]
        x[i] = s / L[i, i]
    return 0


def fn_quantile(object X_in, object y_in, double tau,
                double tol=1e-10, int max_iter=200):
    """Frisch-Newton interior point on the bounded-variables dual LP.

    Same contract as the pure-Python twin: returns (beta, a, n_iter, status).
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.ascontiguousarray(X_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef int n = X.shape[0]
    cdef int k = X.shape[1]
    cdef double big = 0.9995

    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.full(n, 1.0 - tau)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b_eq = X.T @ a

    cdef cnp.ndarray[cnp.float64_t, ndim=2] gram = X.T @ X
    cdef double jitter = 1e-12 * (np.trace(gram) / max(k, 1) + 1.0)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] beta
    try:
        beta = np.linalg.solve(gram + jitter * np.eye(k), X.T @ y)
    except np.linalg.LinAlgError:
        return np.zeros(k), a, 0, STATUS_DEGENERATE

    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = y - X @ beta
    cdef double scale = np.max(np.abs(y)) + 1.0
    cdef double eps0 = 1e-4 * scale + 1e-8
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v = np.maximum(r, 0.0) + eps0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.maximum(-r, 0.0) + eps0

    cdef cnp.ndarray[cnp.float64_t, ndim=1] qinv = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] da = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dz = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dv = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tz = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tv = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] lhs = np.empty((k, k))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Lf = np.empty((k, k))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rhs = np.empty(k)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dbeta = np.empty(k)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rp = np.empty(k)

    cdef double[:, ::1] Xv = X
    cdef double[::1] yv = y, av = a, zv = z, vv = v, rv = r, betav = beta
    cdef double[::1] qinvv = qinv, gv = g, dav = da, dzv = dz, dvv = dv
    cdef double[::1] tzv = tz, tvv = tv, rhsv = rhs, dbetav = dbeta, rpv = rp, beqv = b_eq
    cdef double[:, ::1] lhsv = lhs, Lfv = Lf

    cdef int it, i, j, m, status = STATUS_ITER_LIMIT
    cdef double gap, obj, dual_obj, si, mu, gap_aff, ap, ad, al, tmp, rd_i, sy

    sy = 0.0
    for i in range(n):
        sy += yv[i]

    for it in range(1, max_iter + 1):
        gap = 0.0
        obj = 0.0
        dual_obj = 0.0
        for i in range(n):
            si = 1.0 - av[i]
            gap += zv[i] * av[i] + vv[i] * si
            if rv[i] < 0.0:
                obj += rv[i] * (tau - 1.0)
            else:
                obj += rv[i] * tau
            dual_obj += yv[i] * av[i]
        dual_obj -= (1.0 - tau) * sy
        # primal feasibility X'a - b
        for j in range(k):
            tmp = 0.0
            for i in range(n):
                tmp += Xv[i, j] * av[i]
            rpv[j] = beqv[j] - tmp
        tmp = 0.0
        for j in range(k):
            tmp = fmax(tmp, fabs(rpv[j]))
        if (gap <= tol * (1.0 + fabs(obj)) and tmp <= tol * scale * n
                and fabs(obj - dual_obj) <= 1e-8 * (1.0 + fabs(obj))):
            status = STATUS_CONVERGED
            break

        for i in range(n):
            si = 1.0 - av[i]
            qinvv[i] = 1.0 / (zv[i] / av[i] + vv[i] / si)
            rd_i = rv[i] - vv[i] + zv[i]
            gv[i] = -zv[i] + vv[i] + rd_i

        if _solve_ip(Xv, qinvv, gv, rpv, lhsv, Lfv, rhsv, dbetav, n, k) != 0:
            return beta, a, it, STATUS_DEGENERATE
        _apply_step(Xv, qinvv, gv, dbetav, dav, n, k)
        for i in range(n):
            si = 1.0 - av[i]
            dzv[i] = -zv[i] - (zv[i] / av[i]) * dav[i]
            dvv[i] = -vv[i] + (vv[i] / si) * dav[i]

        ap = _step_box(av, dav, n, big)
        ad = _step_pos(zv, dzv, vv, dvv, n, big)
        gap_aff = 0.0
        for i in range(n):
            gap_aff += ((zv[i] + ad * dzv[i]) * (av[i] + ap * dav[i])
                        + (vv[i] + ad * dvv[i]) * (1.0 - av[i] - ap * dav[i]))
        if gap > 0.0:
            mu = (fmax(gap_aff, 0.0) / gap) ** 3 * gap / (2.0 * n)
        else:
            mu = 0.0

        for i in range(n):
            si = 1.0 - av[i]
            tzv[i] = mu - dav[i] * dzv[i]
            tvv[i] = mu + dav[i] * dvv[i]
            rd_i = rv[i] - vv[i] + zv[i]
            gv[i] = tzv[i] / av[i] - tvv[i] / si - zv[i] + vv[i] + rd_i
        if _solve_ip(Xv, qinvv, gv, rpv, lhsv, Lfv, rhsv, dbetav, n, k) != 0:
            return beta, a, it, STATUS_DEGENERATE
        _apply_step(Xv, qinvv, gv, dbetav, dav, n, k)
        for i in range(n):
            si = 1.0 - av[i]
            dzv[i] = tzv[i] / av[i] - zv[i] - (zv[i] / av[i]) * dav[i]
            dvv[i] = tvv[i] / si - vv[i] + (vv[i] / si) * dav[i]

        ap = _step_box(av, dav, n, big)
        ad = _step_pos(zv, dzv, vv, dvv, n, big)
        al = fmin(ap, ad)
        for i in range(n):
            av[i] = av[i] + al * dav[i]
            if av[i] < 1e-14:
                av[i] = 1e-14
            elif av[i] > 1.0 - 1e-14:
                av[i] = 1.0 - 1e-14
            zv[i] = fmax(zv[i] + al * dzv[i], 1e-14)
            vv[i] = fmax(vv[i] + al * dvv[i], 1e-14)
        for j in range(k):
            betav[j] = betav[j] + al * dbetav[j]
        for i in range(n):
            tmp = yv[i]
            for j in range(k):
                tmp -= Xv[i, j] * betav[j]
            rv[i] = tmp

    return beta, a, it, status


cdef int _solve_ip(double[:, ::1] X, double[::1] qinv, double[::1] g,
                   double[::1] rp, double[:, ::1] lhs, double[:, ::1] Lf,
                   double[::1] rhs, double[::1] dbeta, int n, int k) nogil:
    """Form X'QinvX dbeta = X'(qinv g) - rp and solve."""
    cdef int i, j, m
    cdef double s
    for j in range(k):
        for m in range(j + 1):
            s = 0.0
            for i in range(n):
                s += X[i, j] * qinv[i] * X[i, m]
            lhs[j, m] = s
            lhs[m, j] = s
        s = 0.0
        for i in range(n):
            s += X[i, j] * qinv[i] * g[i]
        rhs[j] = s - rp[j]
    return _chol_solve(lhs, rhs, dbeta, Lf, k)


cdef void _apply_step(double[:, ::1] X, double[::1] qinv, double[::1] g,
                      double[::1] dbeta, double[::1] da, int n, int k) nogil:
    cdef int i, j
    cdef double s
    for i in range(n):
        s = g[i]
        for j in range(k):
            s -= X[i, j] * dbeta[j]
        da[i] = qinv[i] * s


cdef double _step_box(double[::1] a, double[::1] da, int n, double big) nogil:
    cdef double t = 1.0
    cdef int i
    for i in range(n):
        if da[i] < 0.0:
            t = fmin(t, big * (-a[i] / da[i]))
        elif da[i] > 0.0:
            t = fmin(t, big * ((1.0 - a[i]) / da[i]))
    return t


cdef double _step_pos(double[::1] z, double[::1] dz,
                      double[::1] v, double[::1] dv, int n, double big) nogil:
    cdef double t = 1.0
    cdef int i
    for i in range(n):
        if dz[i] < 0.0:
            t = fmin(t, big * (-z[i] / dz[i]))
        if dv[i] < 0.0:
            t = fmin(t, big * (-v[i] / dv[i]))
    return t


def enet_cd(object X_in, object y_in, double tau, double alpha_mix, double lam,
            double h, double b0, object beta_in, int max_sweeps=500, double tol=1e-8):
    """Semismooth-Newton coordinate descent at fixed smoothing h.

    Same contract as the pure-Python twin: returns (b0, beta, sweeps, status).
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.ascontiguousarray(X_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] beta = np.array(beta_in, dtype=np.float64, copy=True)
    cdef int n = X.shape[0]
    cdef int p = X.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = y - b0 - X @ beta
    cdef cnp.ndarray[cnp.float64_t, ndim=1] colsq = np.einsum("ij,ij->j", X, X) / n

    cdef double[:, ::1] Xv = X
    cdef double[::1] rv = r, betav = beta, colsqv = colsq
    cdef double l1 = lam * alpha_mix
    cdef double l2 = lam * (1.0 - alpha_mix)
    cdef int status = STATUS_ITER_LIMIT
    cdef int sweeps = 0, i, j, ok
    cdef double inv2h = 0.5 / h
    cdef double g0, c0, step, cj_loc, cj_mm, cj, gj, target, bnew, d
    cdef double obj0, obj1, base, trial, worst, gabs

    for sweeps in range(1, max_sweeps + 1):
        # intercept step with local curvature, MM fallback keeps descent
        g0 = 0.0
        c0 = 0.0
        for i in range(n):
            g0 -= _psi_h(rv[i], tau, h)
            if fabs(rv[i]) <= h:
                c0 += 1.0
        g0 /= n
        c0 = c0 / n * inv2h
        if c0 < inv2h / n:
            c0 = inv2h / n
        step = -g0 / c0
        obj0 = _sloss(rv, tau, h, n) / n
        obj1 = _sloss_shift(rv, tau, h, n, step) / n
        if obj1 > obj0 + 1e-14 * (1.0 + fabs(obj0)):
            step = -g0 * 2.0 * h
        b0 += step
        for i in range(n):
            rv[i] -= step

        for j in range(p):
            gj = 0.0
            cj_loc = 0.0
            for i in range(n):
                gj -= Xv[i, j] * _psi_h(rv[i], tau, h)
                if fabs(rv[i]) <= h:
                    cj_loc += Xv[i, j] * Xv[i, j]
            gj = gj / n + l2 * betav[j]
            cj_loc = cj_loc / n * inv2h + l2
            cj_mm = colsqv[j] * inv2h + l2
            cj = cj_loc if cj_loc > 1e-12 else cj_mm
            if cj <= 0.0:
                continue
            target = betav[j] - gj / cj
            bnew = _soft_c(target, l1 / cj)
            d = bnew - betav[j]
            if d == 0.0:
                continue
            base = (_sloss(rv, tau, h, n) / n
                    + l1 * fabs(betav[j]) + 0.5 * l2 * betav[j] * betav[j])
            trial = (_sloss_coord(rv, tau, h, n, Xv, j, d) / n
                     + l1 * fabs(bnew) + 0.5 * l2 * bnew * bnew)
            if trial > base + 1e-14 * (1.0 + fabs(base)) and cj != cj_mm:
                target = betav[j] - gj / cj_mm
                bnew = _soft_c(target, l1 / cj_mm)
                d = bnew - betav[j]
                if d == 0.0:
                    continue
            for i in range(n):
                rv[i] -= d * Xv[i, j]
            betav[j] = bnew

        # KKT stationarity check
        worst = 0.0
        g0 = 0.0
        for i in range(n):
            g0 += _psi_h(rv[i], tau, h)
        worst = fabs(g0 / n)
        for j in range(p):
            gj = 0.0
            for i in range(n):
                gj += Xv[i, j] * _psi_h(rv[i], tau, h)
            gj /= n
            if betav[j] != 0.0:
                gabs = fabs(-gj + l2 * betav[j] + (l1 if betav[j] > 0 else -l1))
            else:
                gabs = fabs(gj) - l1
                if gabs < 0.0:
                    gabs = 0.0
            if gabs > worst:
                worst = gabs
        if worst <= tol:
            status = STATUS_CONVERGED
            break
    return b0, beta, sweeps, status


cdef inline double _psi_h(double u, double tau, double h) nogil:
    cdef double c = u / h
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    return tau - 0.5 + 0.5 * c


cdef inline double _rho_h(double u, double tau, double h) nogil:
    cdef double absu = fabs(u)
    cdef double core
    if absu <= h:
        core = u * u / (4.0 * h)
    else:
        core = absu / 2.0 - h / 4.0
    return (tau - 0.5) * u + core


cdef double _sloss(double[::1] r, double tau, double h, int n) nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(n):
        s += _rho_h(r[i], tau, h)
    return s


cdef double _sloss_shift(double[::1] r, double tau, double h, int n, double step) nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(n):
        s += _rho_h(r[i] - step, tau, h)
    return s


cdef double _sloss_coord(double[::1] r, double tau, double h, int n,
                         double[:, ::1] X, int j, double d) nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(n):
        s += _rho_h(r[i] - d * X[i, j], tau, h)
    return s


cdef inline double _soft_c(double x, double k) nogil:
    if x > k:
        return x - k
    if x < -k:
        return x + k
    return 0.0
