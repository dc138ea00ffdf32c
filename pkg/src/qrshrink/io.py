"""CSV ingestion, atomic result emission, run manifests, and the
tau-sweep quantile-process table."""

from __future__ import annotations

import csv
import json
import os
import platform
import tempfile
import time

import numpy as np
from scipy.stats import t as t_dist

from .data import Dataset
from .dgp import ROLE_RESAMPLE, stream_rng
from .solver import fit_ols, fit_quantile


def load_csv(path: str, response: str, covariates: list[str] | None = None,
             intercept: bool = True) -> tuple[Dataset, dict]:
    """Read a headered CSV into a Dataset.

    ``covariates`` defaults to every non-response column.  Rows with empty or
    NA cells in the selected columns are dropped and reported; any other
    non-numeric cell is an error naming its row and column.

    Returns (dataset, report) where report carries n_rows, n_dropped and the
    dropped 0-based data-row indices.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        rows = [row for row in reader if row and any(c.strip() for c in row)]
    if not rows:
        raise ValueError(f"{path} has a header but no data rows")
    if response not in header:
        raise ValueError(f"response column {response!r} not in {path} "
                         f"(columns: {', '.join(header)})")
    if covariates is None:
        covariates = [h for h in header if h != response]
    missing = [c for c in covariates if c not in header]
    if missing:
        raise ValueError(f"missing column(s) {', '.join(repr(m) for m in missing)} "
                         f"in {path}")
    cols = [response] + list(covariates)
    idx = [header.index(c) for c in cols]

    na_tokens = {"", "na", "nan", "null", "none"}
    parsed, dropped = [], []
    for i, row in enumerate(rows):
        vals, drop = [], False
        for c, j in zip(cols, idx):
            if j >= len(row):
                drop = True
                break
            cell = row[j].strip()
            if cell.lower() in na_tokens:
                drop = True
                break
            try:
                vals.append(float(cell))
            except ValueError:
                raise ValueError(
                    f"non-numeric value {cell!r} at data row {i + 1}, "
                    f"column {c!r} of {path}") from None
        if drop:
            dropped.append(i)
        else:
            parsed.append(vals)
    if not parsed:
        raise ValueError(f"every row of {path} was dropped as incomplete")
    arr = np.asarray(parsed, dtype=np.float64)
    data = Dataset(arr[:, 1:], arr[:, 0], list(covariates), intercept=intercept)
    report = {"n_rows": data.n, "n_dropped": len(dropped), "dropped_rows": dropped}
    return data, report


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest round-trip decimal
    return str(v)


def write_csv(path: str, header: list[str], rows) -> None:
    """Write a table atomically (temp file + rename), full-precision floats."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def dataset_to_csv(path: str, data: Dataset, response: str = "y") -> None:
    header = [response] + list(data.labels)
    rows = [[data.y[i]] + [data.X[i, j] for j in range(data.p)]
            for i in range(data.n)]
    write_csv(path, header, rows)


def write_manifest(path: str, *, command: str, args: dict, seed,
                   outputs: list[str], started: float) -> None:
    """JSON record sufficient to reproduce the run bit for bit."""
    import qrshrink

    payload = {
        "command": command,
        "args": args,
        "seed": seed,
        "outputs": outputs,
        "versions": {
            "qrshrink": getattr(qrshrink, "__version__", "unknown"),
            "numpy": np.__version__,
            "python": platform.python_version(),
            "kernel_backend": qrshrink.kernel_backend(),
        },
        "elapsed_seconds": time.time() - started,
    }
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def quantile_process(data: Dataset, tau_grid=None, n_boot: int = 200,
                     seed: int = 0) -> tuple[list[dict], int]:
    """Tidy tau-sweep table for coefficient-process plots.

    One row per (coefficient, tau): the quantile-regression estimate with a
    pairs-bootstrap percentile 90% band, plus the least-squares estimate and
    its conventional 90% interval repeated per coefficient.  Returns
    (rows, n_boot_failures).
    """
    if tau_grid is None:
        tau_grid = np.round(np.arange(0.05, 0.951, 0.05), 10)
    tau_grid = [float(t) for t in tau_grid]
    for t in tau_grid:
        if not 0.0 < t < 1.0:
            raise ValueError(f"tau grid values must lie in (0, 1); got {t}")

    ols = fit_ols(data)
    Z = np.column_stack([np.ones(data.n), data.X]) if data.intercept else data.X
    n, k = Z.shape
    s2 = float(ols.residuals @ ols.residuals) / max(n - k, 1)
    se = np.sqrt(s2 * np.diag(np.linalg.inv(Z.T @ Z)))
    tq = t_dist.ppf(0.95, max(n - k, 1))
    names = (["(intercept)"] if data.intercept else []) + list(data.labels)

    estimates = {t: fit_quantile(data, t).beta for t in tau_grid}
    boots = {t: [] for t in tau_grid}
    failures = 0
    for b in range(n_boot):
        rng = stream_rng(seed, b, ROLE_RESAMPLE)
        idx = rng.integers(0, data.n, data.n)
        bdata = Dataset(data.X[idx], data.y[idx], list(data.labels),
                        intercept=data.intercept)
        for t in tau_grid:
            try:
                boots[t].append(fit_quantile(bdata, t).beta)
            except Exception:  # noqa: BLE001
                failures += 1

    rows = []
    for j, name in enumerate(names):
        for t in tau_grid:
            if boots[t]:
                draws = np.asarray([b[j] for b in boots[t]])
                lo, hi = np.percentile(draws, [5.0, 95.0])
            else:
                lo = hi = None
            rows.append({
                "coefficient": name, "tau": t,
                "estimate": float(estimates[t][j]),
                "band_low": None if lo is None else float(lo),
                "band_high": None if hi is None else float(hi),
                "ols_estimate": float(ols.beta[j]),
                "ols_low": float(ols.beta[j] - tq * se[j]),
                "ols_high": float(ols.beta[j] + tq * se[j]),
            })
    return rows, failures
