"""Dataset ingestion, standardization, and per-predictor distance stacks.

Every downstream routine assumes the conventions enforced here: the response
is centered, and each predictor column is centered with unit squared norm
(``sum(x**2) == 1``, not unit variance).  The distance stack exposes the
per-predictor building blocks that scaled kernels are assembled from without
materializing all ``p`` dense matrices at once.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

import numpy as np

from .errors import DataError

KernelKind = Literal["gaussian", "linear-polynomial"]

KERNEL_KINDS = ("gaussian", "linear-polynomial")

# absolute tolerance for the centering/scaling invariants
CENTER_ATOL = 1e-10


@dataclass(frozen=True)
class Standardization:
    """Location/scale actually applied, kept so datasets can round-trip."""

    y_mean: float
    x_mean: np.ndarray
    x_scale: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """Centered response plus column-standardized design.

    Attributes
    ----------
    y : ndarray, shape (n,)
        Response, centered to sum zero.
    X : ndarray, shape (n, p)
        Design; every column sums to zero and has unit squared norm.
    standardization : Standardization
        Record of the centering/scaling applied to the raw inputs.
    column_names : tuple of str, optional
        Predictor names when the source had a header.
    """

    y: np.ndarray
    X: np.ndarray
    standardization: Standardization
    column_names: tuple[str, ...] | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def validate(self) -> None:
        """Re-check the standardization invariants, raising DataError."""
        y, X = self.y, self.X
        if y.ndim != 1 or X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DataError("response/design shapes are inconsistent")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise DataError("non-finite entries")
        if abs(y.sum()) > CENTER_ATOL * max(1, y.size):
            raise DataError("response is not centered")
        col_sums = X.sum(axis=0)
        col_norms = (X * X).sum(axis=0)
        if np.any(np.abs(col_sums) > 1e-8) or np.any(np.abs(col_norms - 1.0) > 1e-8):
            raise DataError("design columns are not standardized")

    def original(self) -> tuple[np.ndarray, np.ndarray]:
        """Undo the standardization, returning (y_raw, X_raw)."""
        s = self.standardization
        return self.y + s.y_mean, self.X * s.x_scale + s.x_mean

    def select_predictors(self, indices: Sequence[int]) -> "Dataset":
        """Restrict to a subset of predictor columns (e.g. after screening)."""
        idx = np.asarray(indices, dtype=int)
        if idx.ndim != 1 or idx.size == 0:
            raise DataError("predictor subset must be a nonempty 1-D index list")
        if np.any(idx < 0) or np.any(idx >= self.p):
            raise DataError("predictor subset index out of range")
        names = None
        if self.column_names is not None:
            names = tuple(self.column_names[i] for i in idx)
        sub_std = Standardization(
            y_mean=self.standardization.y_mean,
            x_mean=self.standardization.x_mean[idx],
            x_scale=self.standardization.x_scale[idx],
        )
        return Dataset(self.y, self.X[:, idx], sub_std, names)


def standardize_columns(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center columns and scale each to unit squared norm.

    Returns (X_std, means, scales).  Raises DataError on constant columns.
    """
    X = np.asarray(X, dtype=float)
    means = X.mean(axis=0)
    centered = X - means
    scales = np.sqrt((centered * centered).sum(axis=0))
    col_mag = np.maximum(np.abs(X).max(axis=0), 1.0)
    dead = scales <= 1e-12 * col_mag * np.sqrt(X.shape[0])
    if np.any(dead):
        j = int(np.nonzero(dead)[0][0])
        raise DataError(f"constant predictor column (index {j}) cannot be standardized")
    return centered / scales, means, scales


def standardize_dataset(
    y: np.ndarray,
    X: np.ndarray,
    column_names: Sequence[str] | None = None,
) -> Dataset:
    """Build a Dataset from raw arrays, applying the package conventions."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DataError("design must be a 2-D array")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise DataError("response length does not match the design")
    n, p = X.shape
    if n < 2:
        raise DataError("need at least two observations")
    if p < 1:
        raise DataError("need at least one predictor")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise DataError("non-finite entries in the input data")
    if column_names is not None:
        column_names = tuple(str(c) for c in column_names)
        if len(column_names) != p:
            raise DataError("column name count does not match the design")

    y_mean = float(y.mean())
    yc = y - y_mean
    if np.max(np.abs(yc)) <= 1e-12 * max(1.0, abs(y_mean)):
        raise DataError("zero-variance response")
    Xs, means, scales = standardize_columns(X)
    return Dataset(yc, Xs, Standardization(y_mean, means, scales), column_names)


def load_dataset(
    path,
    response_column: str | int,
    delimiter: str = ",",
) -> Dataset:
    """Read a delimited text file with a header row into a Dataset.

    ``response_column`` is matched against the header first; failing that, a
    numeric value is treated as a zero-based column index.  Missing cells and
    unparsable tokens are hard errors reported with row/column positions.
    """
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh, delimiter=delimiter) if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 3:
        raise DataError(f"{path}: need a header row and at least two data rows")
    header = [c.strip() for c in rows[0]]
    ncol = len(header)

    if isinstance(response_column, str) and response_column in header:
        resp = header.index(response_column)
    else:
        try:
            resp = int(response_column)
        except (TypeError, ValueError):
            raise DataError(
                f"response column {response_column!r} not found in header {header}"
            ) from None
        if not 0 <= resp < ncol:
            raise DataError(f"response column index {resp} out of range (0..{ncol - 1})")

    data = np.empty((len(rows) - 1, ncol))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != ncol:
            raise DataError(f"{path}: row {r} has {len(row)} fields, expected {ncol}")
        for c, cell in enumerate(row):
            cell = cell.strip()
            if not cell:
                raise DataError(f"{path}: missing value at row {r}, column {header[c]!r}")
            try:
                data[r - 2, c] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: cannot parse {cell!r} at row {r}, column {header[c]!r}"
                ) from None
    if not np.all(np.isfinite(data)):
        bad = np.argwhere(~np.isfinite(data))[0]
        raise DataError(
            f"{path}: non-finite value at row {bad[0] + 2}, column {header[bad[1]]!r}"
        )

    keep = [c for c in range(ncol) if c != resp]
    names = tuple(header[c] for c in keep)
    return standardize_dataset(data[:, resp], data[:, keep], names)


@dataclass(frozen=True)
class DistanceStack:
    """Per-predictor kernel building blocks over a standardized design.

    For the gaussian kind, block ``j`` holds negated squared coordinate
    differences; for the linear-polynomial kind it is the rank-one outer
    product of column ``j``.  Blocks are materialized on demand because the
    whole stack is O(p n^2) memory.
    """

    kind: KernelKind
    X: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def matrix(self, j: int) -> np.ndarray:
        """Dense block for predictor ``j`` (zero-based)."""
        if not 0 <= j < self.p:
            raise IndexError(f"predictor index {j} out of range (0..{self.p - 1})")
        x = self.X[:, j]
        if self.kind == "gaussian":
            diff = x[:, None] - x[None, :]
            return -(diff * diff)
        return np.outer(x, x)

    def matrices(self) -> Iterator[np.ndarray]:
        """Iterate over all blocks; intended for small problems and tests."""
        for j in range(self.p):
            yield self.matrix(j)

    def weighted_sum(self, weights: np.ndarray) -> np.ndarray:
        """Return ``sum_j weights[j] * block_j`` without materializing blocks.

        Uses the weighted Gram matrix: with G = (X * w) X' and s = diag(G),
        the gaussian sum is ``2G - s 1' - 1 s'`` (exactly zero diagonal) and
        the linear-polynomial sum is G itself.
        """
        w = np.asarray(weights, dtype=float)
        if w.shape != (self.p,):
            raise ValueError(f"expected {self.p} weights, got shape {w.shape}")
        G = (self.X * w) @ self.X.T
        G = 0.5 * (G + G.T)
        if self.kind == "linear-polynomial":
            return G
        s = np.diag(G).copy()
        # group the rank-one part first so the result is bitwise symmetric
        return 2.0 * G - (s[:, None] + s[None, :])


def build_distance_stack(dataset: Dataset, kind: KernelKind) -> DistanceStack:
    """Validate the dataset and wrap its design in a DistanceStack."""
    if kind not in KERNEL_KINDS:
        raise DataError(f"unknown kernel kind {kind!r}; expected one of {KERNEL_KINDS}")
    dataset.validate()
    return DistanceStack(kind, dataset.X)
