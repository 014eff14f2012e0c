"""In-memory datasets: construction from arrays, CSV ingestion and synthetic
Gaussian-blob generation.

A :class:`Dataset` is the unit everything else consumes: the centralized
source that gets partitioned, each node's local split, and the held-out test
set. Datasets are immutable after construction and therefore safe to share
across concurrent workers.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyFeatures,
    InvalidArgument,
    IoError,
    MissingColumn,
    NoLabels,
    ParseError,
    ShapeMismatch,
)
from .rng import substream


def _locked(a: np.ndarray) -> np.ndarray:
    out = np.array(a, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Dense feature matrix with optional labels and stable row/column ids.

    ``row_ids`` and ``feature_ids`` record each row's and column's index in
    the dataset this one was sliced from, so node splits stay traceable to
    their source. Features are float64; labels are int64 for classification
    and float64 for regression.
    """

    features: np.ndarray
    labels: np.ndarray | None = None
    row_ids: np.ndarray | None = None
    feature_ids: np.ndarray | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ShapeMismatch(f"features must be 2-D, got shape {feats.shape}")
        n, k = feats.shape
        if k == 0:
            raise EmptyFeatures("dataset must have at least one feature column")
        object.__setattr__(self, "features", _locked(feats))

        labels = self.labels
        if labels is not None:
            arr = np.asarray(labels)
            if arr.ndim != 1:
                raise ShapeMismatch(f"labels must be 1-D, got shape {arr.shape}")
            if len(arr) != n:
                raise ShapeMismatch(f"{len(arr)} labels for {n} rows")
            dtype = np.int64 if arr.dtype.kind in "biu" else np.float64
            object.__setattr__(self, "labels", _locked(arr.astype(dtype)))

        row_ids = np.arange(n, dtype=np.int64) if self.row_ids is None else np.asarray(self.row_ids, dtype=np.int64)
        feat_ids = np.arange(k, dtype=np.int64) if self.feature_ids is None else np.asarray(self.feature_ids, dtype=np.int64)
        if len(row_ids) != n or len(np.unique(row_ids)) != n:
            raise InvalidArgument("row_ids must be unique and match the row count")
        if len(feat_ids) != k or len(np.unique(feat_ids)) != k:
            raise InvalidArgument("feature_ids must be unique and match the column count")
        object.__setattr__(self, "row_ids", _locked(row_ids))
        object.__setattr__(self, "feature_ids", _locked(feat_ids))

    @classmethod
    def from_arrays(cls, features, labels=None) -> "Dataset":
        """Build a dataset from raw arrays with fresh 0..n-1 row/feature ids."""
        return cls(features=features, labels=labels)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def take_rows(self, positions) -> "Dataset":
        """Dataset restricted to the given row positions (not row ids)."""
        pos = np.asarray(positions, dtype=np.int64)
        labels = None if self.labels is None else self.labels[pos]
        return Dataset(self.features[pos], labels, self.row_ids[pos], self.feature_ids)

    def take_features(self, positions) -> "Dataset":
        """Dataset restricted to the given column positions (not feature ids)."""
        pos = np.asarray(positions, dtype=np.int64)
        return Dataset(self.features[:, pos], self.labels, self.row_ids, self.feature_ids[pos])

    def without_labels(self) -> "Dataset":
        return Dataset(self.features, None, self.row_ids, self.feature_ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if (self.labels is None) != (other.labels is None):
            return False
        if self.labels is not None:
            if self.labels.dtype.kind != other.labels.dtype.kind:
                return False
            if not np.array_equal(self.labels, other.labels):
                return False
        return (
            np.array_equal(self.features, other.features)
            and np.array_equal(self.row_ids, other.row_ids)
            and np.array_equal(self.feature_ids, other.feature_ids)
        )

    def __repr__(self) -> str:
        lab = "labeled" if self.has_labels else "unlabeled"
        return f"Dataset({self.n_samples}x{self.n_features}, {lab})"


@dataclass(frozen=True, eq=False)
class LabelSummary:
    """Sorted distinct classes with their sample counts."""

    classes: np.ndarray
    counts: np.ndarray


def summarize_labels(d: Dataset) -> LabelSummary:
    if d.labels is None:
        raise NoLabels("dataset has no labels to summarize")
    classes, counts = np.unique(d.labels, return_counts=True)
    return LabelSummary(_locked(classes), _locked(counts.astype(np.int64)))


def generate_blobs(n_samples: int, n_features: int, n_classes: int,
                   class_separation: float, seed: int) -> Dataset:
    """Labeled isotropic Gaussian blobs, one unit-variance cluster per class.

    Cluster centers are drawn once from the seeded stream and rescaled so the
    closest pair of centers sits exactly ``class_separation`` apart; all
    pairwise center distances therefore scale linearly with it. Per-class
    counts are balanced to within one sample and rows are shuffled.
    """
    if n_classes < 2:
        raise InvalidArgument("n_classes must be at least 2")
    if n_samples < n_classes:
        raise InvalidArgument("need at least one sample per class")
    if n_features < 1:
        raise InvalidArgument("n_features must be at least 1")
    if class_separation <= 0:
        raise InvalidArgument("class_separation must be positive")

    rng = substream(seed, "blobs")
    centers = rng.standard_normal((n_classes, n_features))
    deltas = centers[:, None, :] - centers[None, :, :]
    dist = np.sqrt((deltas ** 2).sum(axis=-1))
    np.fill_diagonal(dist, np.inf)
    centers *= class_separation / dist.min()

    base, extra = divmod(n_samples, n_classes)
    counts = [base + (1 if c < extra else 0) for c in range(n_classes)]
    parts = [centers[c] + rng.standard_normal((counts[c], n_features)) for c in range(n_classes)]
    features = np.vstack(parts)
    labels = np.repeat(np.arange(n_classes, dtype=np.int64), counts)

    order = rng.permutation(n_samples)
    return Dataset.from_arrays(features[order], labels[order])


def load_csv(path, label_column: str | None = None, has_header: bool = True) -> Dataset:
    """Read a numeric CSV into a Dataset.

    Cells must all parse as reals (missing values are an error, never
    imputed); the label column, when named, becomes int64 labels if every
    value is integral and float64 otherwise. ``label_column`` requires a
    header row.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    header = None
    if has_header:
        if not rows:
            raise ParseError(f"{path}: empty file, expected a header row")
        header = [name.strip() for name in rows[0]]
        rows = rows[1:]

    label_idx = None
    if label_column is not None:
        if header is None:
            raise MissingColumn("label_column requires has_header=True")
        if label_column not in header:
            raise MissingColumn(f"no column named {label_column!r} in {header}")
        label_idx = header.index(label_column)

    width = len(header) if header is not None else (len(rows[0]) if rows else 0)
    n_feature_cols = width - (1 if label_idx is not None else 0)
    if n_feature_cols < 1:
        raise EmptyFeatures(f"{path}: no feature columns")

    features = np.empty((len(rows), n_feature_cols), dtype=np.float64)
    raw_labels: list[float] = []
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"row {i}: expected {width} cells, got {len(row)}", row=i)
        j_out = 0
        for j, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"row {i}, column {j}: not a number: {cell!r}", row=i, col=j) from None
            if not np.isfinite(value):
                raise ParseError(f"row {i}, column {j}: non-finite value {cell!r}", row=i, col=j)
            if j == label_idx:
                raw_labels.append(value)
            else:
                features[i, j_out] = value
                j_out += 1

    labels = None
    if label_idx is not None:
        arr = np.asarray(raw_labels, dtype=np.float64)
        if arr.size and np.all(arr == np.floor(arr)):
            labels = arr.astype(np.int64)
        else:
            labels = arr
    return Dataset.from_arrays(features, labels)


def write_csv(d: Dataset, path, header: bool = True) -> None:
    """Write a dataset as CSV (feature columns x0..xK-1, label column y).

    Values use shortest round-trip decimal form, so load_csv reads back the
    exact same floats. Mainly a test-support helper.
    """

    def fmt(v) -> str:
        return repr(float(v)) if isinstance(v, (float, np.floating)) else str(int(v))

    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            names = [f"x{j}" for j in range(d.n_features)]
            if d.has_labels:
                names.append("y")
            fh.write(",".join(names) + "\n")
        for i in range(d.n_samples):
            cells = [repr(float(v)) for v in d.features[i]]
            if d.has_labels:
                cells.append(fmt(d.labels[i]))
            fh.write(",".join(cells) + "\n")
