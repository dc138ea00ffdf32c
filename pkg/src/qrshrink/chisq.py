"""Central and noncentral chi-square machinery, self-contained.

Everything here is built on a hand-rolled regularized incomplete gamma
(series + continued fraction) so that critical values and risk expressions
are bit-identical across platforms; no distribution tables or external
special-function libraries are involved.  Noncentral quantities use the
Poisson-mixture representation truncated when the remaining tail weight
drops below 1e-14.
"""

from __future__ import annotations

import math

_EPS = 1e-16
_MAX_ITER = 10000
_TAIL = 1e-14


def _gamma_p_series(a: float, x: float) -> float:
    """Lower regularized incomplete gamma by power series (x < a + 1)."""
    term = 1.0 / a
    total = term
    n = a
    for _ in range(_MAX_ITER):
        n += 1.0
        term *= x / n
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    """Upper regularized incomplete gamma by Lentz continued fraction (x >= a + 1)."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0.0:
        raise ValueError(f"shape must be positive, got {a}")
    if x < 0.0:
        raise ValueError(f"x must be nonnegative, got {x}")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return min(_gamma_p_series(a, x), 1.0)
    return max(1.0 - _gamma_q_contfrac(a, x), 0.0)


def chi2_cdf(x: float, df: float) -> float:
    """Central chi-square CDF."""
    if df <= 0:
        raise ValueError(f"df must be positive, got {df}")
    if x <= 0.0:
        return 0.0
    return gamma_p(0.5 * df, 0.5 * x)


def chi2_ppf(q: float, df: float) -> float:
    """Central chi-square quantile by bisection on the series CDF."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {q}")
    lo, hi = 0.0, max(4.0 * df, 16.0)
    while chi2_cdf(hi, df) < q:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("chi2_ppf bracket expansion failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * (1.0 + hi):
            break
    return 0.5 * (lo + hi)


def _poisson_weights(delta: float):
    """Poisson(delta/2) weights covering all but < 1e-14 of the mass.

    Returns (k0, weights) where weights[i] corresponds to k = k0 + i.
    """
    lam = 0.5 * delta
    if lam == 0.0:
        return 0, [1.0]
    mode = int(lam)
    logw0 = -lam + mode * math.log(lam) - math.lgamma(mode + 1)
    w_mode = math.exp(logw0)
    lo_w = [w_mode]
    k = mode
    while k > 0:
        nxt = lo_w[-1] * k / lam
        if nxt < _TAIL * w_mode and k < mode:
            break
        lo_w.append(nxt)
        k -= 1
    lo_w.reverse()
    k0 = k if k > 0 else mode - (len(lo_w) - 1)
    weights = lo_w
    w = w_mode
    k = mode
    total = sum(weights)
    while True:
        k += 1
        w *= lam / k
        weights.append(w)
        total += w
        if w < _TAIL * w_mode and 1.0 - total < _TAIL:
            break
        if k - mode > _MAX_ITER:
            break
    return k0, weights


def ncchisq_cdf(x: float, df: float, delta: float) -> float:
    """Noncentral chi-square CDF via the Poisson mixture of central CDFs.

    Absolute error is at the series truncation level (~1e-13); output is
    clamped to [0, 1].
    """
    if df <= 0:
        raise ValueError(f"df must be positive, got {df}")
    if delta < 0:
        raise ValueError(f"noncentrality must be nonnegative, got {delta}")
    if x <= 0.0:
        return 0.0
    k0, w = _poisson_weights(delta)
    total = 0.0
    for i, wi in enumerate(w):
        total += wi * gamma_p(0.5 * (df + 2 * (k0 + i)), 0.5 * x)
    return min(max(total, 0.0), 1.0)


def expect_inv_ncchisq(df: float, delta: float, power: int = 1) -> float:
    """E[(chi^2_df(delta))^(-power)] for power in {1, 2}.

    Uses the Poisson mixture of central inverse moments
    E[(chi^2_nu)^-1] = 1/(nu-2) and E[(chi^2_nu)^-2] = 1/((nu-2)(nu-4)).
    """
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    if df <= 2 * power:
        raise ValueError(f"moment does not exist: df={df} <= {2 * power}")
    if delta < 0:
        raise ValueError("noncentrality must be nonnegative")
    k0, w = _poisson_weights(delta)
    total = 0.0
    for i, wi in enumerate(w):
        nu = df + 2 * (k0 + i)
        if power == 1:
            total += wi / (nu - 2.0)
        else:
            total += wi / ((nu - 2.0) * (nu - 4.0))
    return total


def truncated_moment(df: float, delta: float, cutoff: float, power: int = 0) -> float:
    """E[(chi^2_df(delta))^(-power) 1{chi^2_df(delta) < cutoff}] for power in {0, 1, 2}.

    Each mixture component reduces to an incomplete-gamma term:
    E[X^-m 1{X<c}] for X ~ chi^2_nu equals
    2^-m Gamma(nu/2 - m)/Gamma(nu/2) P(nu/2 - m, c/2).
    """
    if power not in (0, 1, 2):
        raise ValueError("power must be 0, 1 or 2")
    if power > 0 and df <= 2 * power:
        raise ValueError(f"moment does not exist: df={df} <= {2 * power}")
    if delta < 0:
        raise ValueError("noncentrality must be nonnegative")
    if cutoff <= 0.0:
        return 0.0
    k0, w = _poisson_weights(delta)
    total = 0.0
    for i, wi in enumerate(w):
        half = 0.5 * (df + 2 * (k0 + i))
        if power == 0:
            total += wi * gamma_p(half, 0.5 * cutoff)
        else:
            scale = math.exp(math.lgamma(half - power) - math.lgamma(half)) / 2.0 ** power
            total += wi * scale * gamma_p(half - power, 0.5 * cutoff)
    return total
