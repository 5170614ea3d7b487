"""Dataset loading, synthesis and validation.

Features are always unit-normalized row vectors and must be pairwise
distinct: the closed-form kernel's strict positivity argument needs
x_i != x_j, and near-duplicates make arccos ill-conditioned after
normalization.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NORM_TOL = 1e-9
DISTINCT_TOL = 1e-9


class DataError(ValueError):
    """Malformed, degenerate or duplicate input data."""


@dataclass(frozen=True)
class Dataset:
    """Unit-norm features X (n x d) with real labels y (length n)."""

    X: np.ndarray
    y: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"features must be a nonempty 2-d array, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataError(f"labels shape {y.shape} does not match {X.shape[0]} rows")
        norms = np.linalg.norm(X, axis=1)
        bad = np.where(np.abs(norms - 1.0) > NORM_TOL)[0]
        if bad.size:
            raise DataError(f"rows {bad.tolist()[:5]} are not unit-norm (|‖x‖-1| > {NORM_TOL:g})")
        _check_distinct(X)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _check_distinct(X: np.ndarray, tol: float = DISTINCT_TOL):
    n = X.shape[0]
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(d2, np.inf)
    i, j = np.unravel_index(np.argmin(d2), d2.shape)
    if n > 1 and d2[i, j] < tol * tol:
        dup = [(int(a), int(b)) for a, b in zip(*np.where(np.triu(d2 < tol * tol, 1)))]
        raise DataError(f"duplicate feature rows after normalization: {dup[:10]}")


def normalize_rows(X: np.ndarray) -> np.ndarray:
    """Scale each row to unit l2 norm; zero rows are rejected."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    zero = np.where(norms == 0.0)[0]
    if zero.size:
        raise DataError(f"rows {zero.tolist()} have zero norm and cannot be normalized")
    return X / norms[:, None]


def synthetic(n: int, d: int, seed: int, name: str | None = None) -> Dataset:
    """Seeded Gaussian features (unit-normalized) with uniform ±1 labels.

    Uses numpy's PCG64 generator; deterministic for fixed (n, d, seed).
    """
    if n < 1 or d < 2:
        raise DataError(f"synthetic needs n >= 1 and d >= 2, got n={n} d={d}")
    rng = np.random.default_rng(seed)
    for _ in range(16):
        X = normalize_rows(rng.standard_normal((n, d)))
        y = rng.choice([-1.0, 1.0], size=n)
        try:
            _check_distinct(X)
        except DataError:
            continue  # probability-zero collision; redraw
        return Dataset(X, y, name or f"synthetic(n={n},d={d},seed={seed})")
    raise DataError("could not draw distinct synthetic features")


def load_csv(
    path: str | Path,
    label_column: int = -1,
    positive_class: str | None = None,
    regression: bool = False,
    standardize_labels: bool = True,
    name: str | None = None,
) -> Dataset:
    """Load a comma-separated dataset and unit-normalize its feature rows.

    Classification mode (``positive_class`` given): labels equal to
    ``positive_class`` map to +1, everything else to -1. Regression mode:
    labels pass through, standardized to zero mean / unit variance by
    default so initial residual norms are comparable across datasets.

    A non-numeric first row is treated as a header and skipped.
    """
    path = Path(path)
    rows: list[list[str]] = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: empty file")
    start = 0
    if not _all_numeric(rows[0], label_column, positive_class):
        start = 1
    body = rows[start:]
    if not body:
        raise DataError(f"{path}: no data rows")
    arity = len(body[0])
    feats, labels = [], []
    for off, row in enumerate(body):
        lineno = start + off + 1
        if len(row) != arity:
            raise DataError(f"{path}:{lineno}: expected {arity} fields, got {len(row)}")
        lc = label_column % len(row)
        try:
            feats.append([float(v) for k, v in enumerate(row) if k != lc])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: unparseable feature value ({exc})") from None
        raw = row[lc].strip()
        if positive_class is not None:
            labels.append(1.0 if raw == str(positive_class) else -1.0)
        else:
            try:
                labels.append(float(raw))
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparseable label {raw!r}") from None
    X = normalize_rows(np.asarray(feats, dtype=np.float64))
    y = np.asarray(labels, dtype=np.float64)
    if regression and positive_class is None and standardize_labels:
        std = y.std()
        if std == 0.0:
            raise DataError(f"{path}: constant regression labels cannot be standardized")
        y = (y - y.mean()) / std
    return Dataset(X, y, name or path.stem)


def save_csv(ds: Dataset, path: str | Path):
    """Write a dataset back out: feature columns then a final label column."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k}" for k in range(ds.d)] + ["y"])
        for i in range(ds.n):
            w.writerow([repr(float(v)) for v in ds.X[i]] + [repr(float(ds.y[i]))])


def _all_numeric(row: list[str], label_column: int, positive_class: str | None) -> bool:
    lc = label_column % len(row)
    for k, v in enumerate(row):
        if k == lc and positive_class is not None:
            continue  # class labels may be non-numeric
        try:
            float(v)
        except ValueError:
            return False
    return True
