"""Core data containers: datasets and coefficient partitions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Dataset:
    """A regression design with labels and optional centering metadata.

    Parameters
    ----------
    X : (n, p) array of covariates.
    y : (n,) response.
    labels : column names; generated as x1..xp when omitted.
    intercept : whether models fitted on this dataset include an intercept.
    center : per-column values already subtracted from X (length p), or None.
    scale : per-column values X was divided by (length p), or None.
    """

    X: np.ndarray
    y: np.ndarray
    labels: list[str] = field(default_factory=list)
    intercept: bool = True
    center: np.ndarray | None = None
    scale: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        n, p = self.X.shape
        if n < 1 or p < 1:
            raise ValueError("design must have at least one row and one column")
        if self.y.shape[0] != n:
            raise ValueError(f"y has {self.y.shape[0]} rows, X has {n}")
        if not np.all(np.isfinite(self.X)) or not np.all(np.isfinite(self.y)):
            raise ValueError("non-finite entries in X or y")
        if not self.labels:
            self.labels = [f"x{j + 1}" for j in range(p)]
        if len(self.labels) != p:
            raise ValueError(f"{len(self.labels)} labels for {p} columns")
        for name, arr in (("center", self.center), ("scale", self.scale)):
            if arr is not None:
                arr = np.asarray(arr, dtype=np.float64).ravel()
                if arr.shape[0] != p:
                    raise ValueError(f"{name} must have exactly {p} entries")
                setattr(self, name, arr)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def centered_by(self, means: np.ndarray) -> "Dataset":
        """Return a copy with ``means`` subtracted from the columns."""
        means = np.asarray(means, dtype=np.float64).ravel()
        if means.shape[0] != self.p:
            raise ValueError("centering vector length mismatch")
        prev = self.center if self.center is not None else np.zeros(self.p)
        return Dataset(self.X - means, self.y, list(self.labels),
                       self.intercept, center=prev + means, scale=self.scale)


@dataclass(frozen=True)
class PartitionSpec:
    """Split of the covariate indices into a kept block and a tested block.

    Indices are 0-based positions into the dataset's columns; they need not
    be contiguous.  The intercept is never part of either block and is always
    estimated.
    """

    keep_idx: tuple[int, ...]
    test_idx: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "keep_idx", tuple(int(i) for i in self.keep_idx))
        object.__setattr__(self, "test_idx", tuple(int(i) for i in self.test_idx))
        if not self.test_idx:
            raise ValueError("the tested block must be nonempty (p2 >= 1)")
        # keep_idx may be empty: the intercept always sits in the kept block,
        # so an intercept-only sub-model is a valid selection outcome
        overlap = set(self.keep_idx) & set(self.test_idx)
        if overlap:
            raise ValueError(f"keep and test blocks overlap: {sorted(overlap)}")

    @classmethod
    def from_keep(cls, keep_idx, p: int) -> "PartitionSpec":
        """Partition where everything outside ``keep_idx`` is tested."""
        keep = tuple(int(i) for i in keep_idx)
        test = tuple(j for j in range(p) if j not in set(keep))
        return cls(keep, test)

    def validate_for(self, p: int) -> None:
        union = sorted(set(self.keep_idx) | set(self.test_idx))
        if union != list(range(p)):
            raise ValueError(
                f"partition must cover all {p} covariate indices exactly; got {union}")

    @property
    def p1(self) -> int:
        return len(self.keep_idx)

    @property
    def p2(self) -> int:
        return len(self.test_idx)
