"""Data generation for the simulation harness.

All randomness flows through counter-based Philox streams keyed by
(base_seed, replication, role), so replication r's draws do not depend on
execution order and any single replication can be regenerated in isolation.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import lfilter

# stream roles
ROLE_DESIGN_TRAIN = 0
ROLE_DESIGN_VAL = 1
ROLE_DESIGN_TEST = 2
ROLE_ERR_TRAIN = 3
ROLE_ERR_VAL = 4
ROLE_ERR_TEST = 5
ROLE_RESAMPLE = 6
ROLE_PERMUTE = 7


def stream_rng(base_seed: int, replication: int = 0, role: int = 0) -> np.random.Generator:
    """Independent Philox stream for (base_seed, replication, role)."""
    key = np.array([np.uint64(base_seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(((replication & 0xFFFFFFFF) << 16) | (role & 0xFFFF))],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return stream_rng(int(seed_or_rng))


def gen_design(n: int, p: int, base: float = 0.5, seed=0) -> np.ndarray:
    """Rows iid N(0, S) with S_jk = base^|j-k|, via the Toeplitz Cholesky factor."""
    if not abs(base) < 1:
        raise ValueError(f"|base| must be below 1, got {base}")
    rng = _as_rng(seed)
    S = toeplitz(base ** np.arange(p, dtype=np.float64))
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:  # unreachable for |base| < 1
        raise ValueError("Toeplitz correlation matrix is not PD") from exc
    return rng.standard_normal((n, p)) @ L.T


def gen_ar1_errors(n: int, rho: float, seed=0) -> np.ndarray:
    """Stationary AR(1) noise: e_1 ~ N(0, 1/(1-rho^2)), e_i = rho e_{i-1} + w_i."""
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be below 1, got {rho}")
    rng = _as_rng(seed)
    w = rng.standard_normal(n)
    w[0] /= np.sqrt(1.0 - rho * rho)
    if rho == 0.0:
        return w
    return lfilter([1.0], [1.0, -rho], w)
