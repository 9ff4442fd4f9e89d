"""Dataset container and CSV ingestion."""

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Dataset:
    """n observations stored row-wise.

    For ``kind="location"`` each row is a point in R^d. For
    ``kind="regression"`` the last column is the response and the others are
    covariates, so a simple regression dataset has two columns ``(x, y)``.
    """

    rows: np.ndarray
    kind: str = "location"

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim == 1:
            rows = rows[:, None]
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ValueError("a dataset needs at least one row")
        if not np.all(np.isfinite(rows)):
            raise ValueError("dataset entries must be finite")
        if self.kind not in ("location", "regression"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "regression" and rows.shape[1] < 2:
            raise ValueError("regression rows need at least one covariate and a response")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def regression(cls, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return cls(np.column_stack([X, np.asarray(y, dtype=float)]), "regression")

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def d(self):
        return self.rows.shape[1]

    @property
    def X(self):
        return self.rows[:, :-1] if self.kind == "regression" else self.rows

    @property
    def y(self):
        if self.kind != "regression":
            raise AttributeError("location data have no response")
        return self.rows[:, -1]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.rows, dtype=dtype)

    def __len__(self):
        return self.n


def as_rows(data, ncols=None):
    """Float matrix view of ``data`` (a Dataset or array-like)."""
    rows = data.rows if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    if ncols is not None and rows.shape[1] != ncols:
        raise ValueError(f"expected {ncols} columns, got {rows.shape[1]}")
    return rows


def read_csv(path, kind="location"):
    """Read a headed CSV; location columns ``x1[,x2]``, regression ``x1..xk,y``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        values = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                values.append([float(f) for f in rec])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if kind == "regression":
        if header[-1] != "y" or any(not h.startswith("x") for h in header[:-1]) or len(header) < 2:
            raise ValueError(f"{path}: regression header must be x1,...,xk,y; got {header}")
    elif any(not h.startswith("x") for h in header):
        raise ValueError(f"{path}: location header must be x1[,x2]; got {header}")
    if not values:
        raise ValueError(f"{path}: no data rows")
    rows = np.array(values, dtype=float)
    if not np.all(np.isfinite(rows)):
        raise ValueError(f"{path}: non-finite entries are not allowed")
    return Dataset(rows, kind)
