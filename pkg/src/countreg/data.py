"""Dataset container, column standardization, and CSV ingestion."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Dataset:
    """Immutable design matrix with a count response.

    Attributes
    ----------
    X : ndarray of shape (n, d)
        Design matrix. When ``standardized`` is true every non-intercept
        column has unit Euclidean norm.
    y : ndarray of shape (n,)
        Nonnegative integer counts (stored as float64).
    column_norms : ndarray of shape (d,)
        Euclidean norms of the raw columns recorded at standardization;
        1.0 for the intercept column and for unstandardized data.
    has_intercept : bool
        True when column 0 is an all-ones intercept column. The intercept
        column is never rescaled.
    standardized : bool
        Whether non-intercept columns were rescaled to unit norm.
    feature_names : tuple of str or None
        Names of the non-intercept columns, when known.
    """

    X: np.ndarray
    y: np.ndarray
    column_norms: np.ndarray
    has_intercept: bool
    standardized: bool = True
    feature_names: tuple = None

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def n_penalized(self):
        """Number of penalized coefficients (intercept excluded)."""
        return self.d - int(self.has_intercept)

    def penalized_slice(self):
        """Slice selecting the penalized (non-intercept) columns."""
        return slice(1, None) if self.has_intercept else slice(None)

    def raw_X(self):
        """Design matrix on the original (pre-standardization) column scale."""
        return self.X * self.column_norms


def _check_counts(y):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size == 0:
        raise ValidationError("response is empty")
    if not np.all(np.isfinite(y)):
        pos = int(np.flatnonzero(~np.isfinite(y))[0])
        raise ValidationError(f"response contains a non-finite value at position {pos}")
    if np.any(y < 0):
        pos = int(np.flatnonzero(y < 0)[0])
        raise ValidationError(f"response must be nonnegative; found {y[pos]} at position {pos}")
    if np.any(y != np.floor(y)):
        pos = int(np.flatnonzero(y != np.floor(y))[0])
        raise ValidationError(f"response must be integer-valued; found {y[pos]} at position {pos}")
    return y


def make_dataset(features, y, add_intercept=True, standardize=True, feature_names=None):
    """Build a :class:`Dataset` from raw feature columns and counts.

    Parameters
    ----------
    features : array-like of shape (n, p)
        Raw feature columns (without an intercept).
    y : array-like of shape (n,)
        Nonnegative integer counts.
    add_intercept : bool
        Prepend an all-ones intercept column (excluded from standardization
        and, downstream, from penalization).
    standardize : bool
        Rescale each feature column to unit Euclidean norm, recording the
        original norms.
    feature_names : sequence of str, optional

    Returns
    -------
    Dataset
    """
    F = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
    if F.ndim == 1:
        F = F.reshape(-1, 1)
    if F.ndim != 2:
        raise ValidationError(f"feature matrix must be 2-dimensional, got ndim={F.ndim}")
    y = _check_counts(y)
    n, p = F.shape
    if n != y.shape[0]:
        raise ValidationError(f"feature rows ({n}) and response length ({y.shape[0]}) differ")
    if n < 1 or p < 1:
        raise ValidationError("need at least one observation and one feature")
    if not np.all(np.isfinite(F)):
        i, j = np.argwhere(~np.isfinite(F))[0]
        raise ValidationError(f"non-finite feature value at row {i}, column {j}")
    if feature_names is not None:
        feature_names = tuple(str(c) for c in feature_names)
        if len(feature_names) != p:
            raise ValidationError("feature_names length does not match feature count")

    norms = np.linalg.norm(F, axis=0)
    if np.any(norms == 0):
        j = int(np.flatnonzero(norms == 0)[0])
        name = feature_names[j] if feature_names else str(j)
        raise ValidationError(f"feature column {name!r} is identically zero")
    if standardize:
        F = F / norms
    else:
        norms = np.ones(p)

    if add_intercept:
        X = np.column_stack([np.ones(n), F])
        col_norms = np.concatenate([[1.0], norms])
    else:
        X = F
        col_norms = norms

    X = np.ascontiguousarray(X)
    for arr in (X, y, col_norms):
        arr.setflags(write=False)
    return Dataset(X=X, y=y, column_norms=col_norms, has_intercept=add_intercept,
                   standardized=standardize, feature_names=feature_names)


def subset_rows(data, rows):
    """Dataset restricted to ``rows``, with fold-local re-standardization.

    Training subsets change column norms, so when the parent dataset was
    standardized the subset's non-intercept columns are rescaled to unit
    norm again.
    """
    rows = np.asarray(rows)
    raw = data.raw_X()[rows]
    feats = raw[:, data.penalized_slice()]
    return make_dataset(feats, data.y[rows], add_intercept=data.has_intercept,
                        standardize=data.standardized, feature_names=data.feature_names)


def read_csv_columns(path, target_column=None):
    """Parse a headed CSV of numeric columns.

    Returns ``(features, y, feature_names)`` where ``y`` is None when no
    target column was requested. Every malformed cell is reported with its
    row and column location.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: file is empty (missing header row)") from None
        header = [h.strip() for h in header]
        seen = set()
        for name in header:
            if name in seen:
                raise ValidationError(f"{path}: duplicate column name {name!r}")
            seen.add(name)
        if target_column is not None and target_column not in header:
            raise ValidationError(f"{path}: target column {target_column!r} not found "
                                  f"(columns: {', '.join(header)})")
        rows = []
        for lineno, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) != len(header):
                raise ValidationError(f"{path}: data row {lineno} has {len(record)} fields, "
                                      f"expected {len(header)}")
            parsed = []
            for name, cell in zip(header, record):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValidationError(f"{path}: non-numeric value {cell!r} at data row "
                                          f"{lineno}, column {name!r}") from None
                if not math.isfinite(v):
                    raise ValidationError(f"{path}: non-finite value {cell!r} at data row "
                                          f"{lineno}, column {name!r}")
                parsed.append(v)
            rows.append(parsed)
    if not rows:
        raise ValidationError(f"{path}: no data rows")

    table = np.asarray(rows, dtype=np.float64)
    if target_column is None:
        return table, None, header

    t = header.index(target_column)
    y = table[:, t]
    for i, v in enumerate(y, start=1):
        if v < 0:
            raise ValidationError(f"{path}: negative target value {v} at data row {i}")
        if v != math.floor(v):
            raise ValidationError(f"{path}: fractional target value {v} at data row {i}")
    feats = np.delete(table, t, axis=1)
    names = [h for k, h in enumerate(header) if k != t]
    if feats.shape[1] == 0:
        raise ValidationError(f"{path}: no feature columns besides the target")
    return feats, y, names


def load_csv(path, target_column, standardize=True, intercept=True):
    """Load a CSV file into a ready-to-fit :class:`Dataset`."""
    feats, y, names = read_csv_columns(path, target_column)
    return make_dataset(feats, y, add_intercept=intercept, standardize=standardize,
                        feature_names=names)
