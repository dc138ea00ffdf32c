"""Kernel backend selection.

The compiled Cython core is preferred; the pure-NumPy twin is used when the
extension is missing or when ``QRSHRINK_PURE_PYTHON=1`` is set.  Both expose
the same functions with identical semantics.
"""

import os

from . import _purepy

if os.environ.get("QRSHRINK_PURE_PYTHON", "").strip() in {"1", "true", "yes"}:
    _backend = _purepy
    BACKEND = "python"
else:
    try:
        from . import _core as _backend  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _backend = _purepy
        BACKEND = "python"

STATUS_CONVERGED = _purepy.STATUS_CONVERGED
STATUS_ITER_LIMIT = _purepy.STATUS_ITER_LIMIT
STATUS_DEGENERATE = _purepy.STATUS_DEGENERATE

fn_quantile = _backend.fn_quantile
enet_cd = _backend.enet_cd
smoothed_loss = _purepy.smoothed_loss
smoothed_score = _purepy.smoothed_score

__all__ = [
    "BACKEND",
    "STATUS_CONVERGED",
    "STATUS_ITER_LIMIT",
    "STATUS_DEGENERATE",
    "fn_quantile",
    "enet_cd",
    "smoothed_loss",
    "smoothed_score",
]
