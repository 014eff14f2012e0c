"""Federated splits: one source Dataset plus a declarative config in, a
mapping node-id -> Dataset out.

Covers sample splits (disjoint or overlapping, uniform or per-class skewed),
disjoint feature splits, and per-node label retention, which together express
horizontal, vertical and transfer-style federations. All randomness is driven
by the config seed; integer quotas come from largest-remainder apportionment
so no sample is lost or duplicated by rounding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import (
    BadLength,
    ClassCountMismatch,
    ConflictingOptions,
    FeatureBudgetExceeded,
    InvalidArgument,
    LabelsRequired,
)
from .rng import substream

_SUM_TOL = 1e-9

# node-id -> Dataset, keys exactly the configured node ids
FedDataset = dict


@dataclass
class FedDatasetConfig:
    """Declarative description of a federated split.

    weights are per-node fractions of the whole sample set;
    weights_per_class is a (n_nodes, n_classes) matrix of per-node fractions
    of each class (column-wise), and the two are mutually exclusive.
    replacement allows one sample to land on several nodes; feature subsets
    are always pairwise disjoint regardless of it.
    """

    seed: int = 0
    n_nodes: int = 1
    node_ids: list[str] | None = None
    replacement: bool = False
    weights: list[float] | None = None
    weights_per_class: object | None = None
    features_per_node: list[int] | None = None
    keep_labels: list[bool] | None = None

    def resolved_node_ids(self) -> list[str]:
        if self.node_ids is not None:
            return [str(i) for i in self.node_ids]
        return [str(i) for i in range(self.n_nodes)]


def validate(config: FedDatasetConfig, source: Dataset) -> None:
    """Check the config against a concrete source dataset; raise on problems."""
    if config.n_nodes < 1:
        raise InvalidArgument("n_nodes must be at least 1")
    n_nodes = config.n_nodes

    if config.node_ids is not None:
        ids = [str(i) for i in config.node_ids]
        if len(ids) != n_nodes:
            raise BadLength(f"node_ids has {len(ids)} entries for {n_nodes} nodes")
        if len(set(ids)) != len(ids):
            raise InvalidArgument("node_ids must be pairwise distinct")

    if config.weights is not None and config.weights_per_class is not None:
        raise ConflictingOptions("weights and weights_per_class are mutually exclusive")

    if config.weights is not None:
        w = np.asarray(config.weights, dtype=np.float64)
        if w.ndim != 1 or len(w) != n_nodes:
            raise BadLength(f"weights has {w.size} entries for {n_nodes} nodes")
        if ((w < 0) | (w > 1)).any():
            raise InvalidArgument("weights must lie in [0, 1]")
        if not config.replacement and w.sum() > 1 + _SUM_TOL:
            raise InvalidArgument(
                f"without replacement, weights must sum to at most 1 (got {w.sum():g})")

    if config.weights_per_class is not None:
        if source.labels is None:
            raise LabelsRequired("weights_per_class needs a labeled dataset")
        m = np.asarray(config.weights_per_class, dtype=np.float64)
        if m.ndim != 2:
            raise InvalidArgument("weights_per_class must be a 2-D matrix")
        if m.shape[0] != n_nodes:
            raise BadLength(f"weights_per_class has {m.shape[0]} rows for {n_nodes} nodes")
        n_classes = len(np.unique(source.labels))
        if m.shape[1] != n_classes:
            raise ClassCountMismatch(
                f"weights_per_class has {m.shape[1]} columns, dataset has {n_classes} classes")
        if (m < 0).any():
            raise InvalidArgument("weights_per_class entries must be nonnegative")
        if not config.replacement and (m.sum(axis=0) > 1 + _SUM_TOL).any():
            raise InvalidArgument(
                "without replacement, each weights_per_class column must sum to at most 1")

    if config.features_per_node is not None:
        counts = list(config.features_per_node)
        if len(counts) != n_nodes:
            raise BadLength(f"features_per_node has {len(counts)} entries for {n_nodes} nodes")
        if any(int(c) < 1 for c in counts):
            raise InvalidArgument("every node needs at least one feature")
        if sum(int(c) for c in counts) > source.n_features:
            raise FeatureBudgetExceeded(
                f"features_per_node asks for {sum(counts)} of {source.n_features} features")

    if config.keep_labels is not None:
        if len(config.keep_labels) != n_nodes:
            raise BadLength(f"keep_labels has {len(config.keep_labels)} entries for {n_nodes} nodes")


def apportion(total: int, weights) -> np.ndarray:
    """Integer allocation of ``total`` units proportional to ``weights``.

    Normalized weights distribute exactly ``total``; sub-normalized weights
    (sum < 1) distribute round(total * sum) and leave the rest unassigned.
    Uses largest-remainder rounding, ties broken toward the lower index, so
    the result is deterministic and off by at most one unit per entry.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InvalidArgument("weights must be a nonempty vector")
    if (w < 0).any():
        raise InvalidArgument("weights must be nonnegative")
    s = float(w.sum())
    if s == 0.0:
        raise InvalidArgument("weights must not be all zero")
    allocate = int(total) if s > 1.0 else int(round(total * s))

    ideal = allocate * (w / s)
    quotas = np.floor(ideal).astype(np.int64)
    leftover = allocate - int(quotas.sum())
    if leftover > 0:
        order = np.lexsort((np.arange(w.size), -(ideal - quotas)))
        quotas[order[:leftover]] += 1
    return quotas


def classes_to_weights(n_nodes: int, n_classes: int, classes_per_node: int, seed: int) -> np.ndarray:
    """Per-class weight matrix where each node covers a random class subset.

    Every row has exactly ``classes_per_node`` equal nonzero entries; columns
    are normalized to sum to 1 (columns no node picked stay all-zero).
    """
    if n_nodes < 1 or n_classes < 1:
        raise InvalidArgument("n_nodes and n_classes must be positive")
    if not 1 <= classes_per_node <= n_classes:
        raise InvalidArgument("classes_per_node must lie in [1, n_classes]")
    rng = substream(seed, "classes-per-node")
    matrix = np.zeros((n_nodes, n_classes))
    for i in range(n_nodes):
        chosen = rng.choice(n_classes, size=classes_per_node, replace=False)
        matrix[i, chosen] = 1.0
    column_sums = matrix.sum(axis=0)
    occupied = column_sums > 0
    matrix[:, occupied] /= column_sums[occupied]
    return matrix


def from_config(source: Dataset, config: FedDatasetConfig) -> FedDataset:
    """Partition ``source`` into per-node datasets according to ``config``.

    Deterministic in (source, config). Row positions per node are sorted, so
    each node sees its samples in source order.
    """
    validate(config, source)
    node_ids = config.resolved_node_ids()
    row_positions = _assign_rows(source, config)
    col_blocks = _assign_columns(source, config)
    keep = list(config.keep_labels) if config.keep_labels is not None else [True] * config.n_nodes

    out: FedDataset = {}
    for i, nid in enumerate(node_ids):
        node = source.take_rows(np.sort(row_positions[i]))
        if col_blocks is not None:
            node = node.take_features(np.sort(col_blocks[i]))
        if not keep[i]:
            node = node.without_labels()
        out[nid] = node
    return out


def _assign_rows(source: Dataset, config: FedDatasetConfig) -> list[np.ndarray]:
    n_nodes = config.n_nodes
    n = source.n_samples

    if config.weights_per_class is not None:
        matrix = np.asarray(config.weights_per_class, dtype=np.float64)
        classes = np.unique(source.labels)
        per_node: list[list[np.ndarray]] = [[] for _ in range(n_nodes)]
        for c_idx in range(len(classes)):
            # independent substream per class keeps the split order-insensitive
            rng = substream(config.seed, "class", c_idx)
            pool = rng.permutation(np.flatnonzero(source.labels == classes[c_idx]))
            column = matrix[:, c_idx]
            if column.sum() == 0.0:
                continue
            quotas = apportion(len(pool), column)
            _deal(rng, pool, quotas, config.replacement, per_node)
        return [np.concatenate(parts) if parts else np.empty(0, dtype=np.int64) for parts in per_node]

    rng = substream(config.seed, "rows")
    pool = rng.permutation(n)
    if config.weights is not None:
        quotas = np.asarray([int(round(float(w) * n)) for w in config.weights], dtype=np.int64)
        if not config.replacement and quotas.sum() > n:
            raise InvalidArgument(
                f"rounded per-node quotas sum to {quotas.sum()} but only {n} samples exist")
    else:
        quotas = apportion(n, np.full(n_nodes, 1.0 / n_nodes))

    per_node = [[] for _ in range(n_nodes)]
    _deal(rng, pool, quotas, config.replacement, per_node)
    return [np.concatenate(parts) if parts else np.empty(0, dtype=np.int64) for parts in per_node]


def _deal(rng, pool: np.ndarray, quotas: np.ndarray, replacement: bool,
          per_node: list[list[np.ndarray]]) -> None:
    """Hand out ``quotas[i]`` entries of ``pool`` to node i.

    Without replacement: consecutive disjoint slices in node order. With
    replacement: each node draws its quota without internal duplicates, but
    nodes may overlap.
    """
    if replacement:
        for i, q in enumerate(quotas):
            per_node[i].append(rng.choice(pool, size=int(q), replace=False))
    else:
        start = 0
        for i, q in enumerate(quotas):
            per_node[i].append(pool[start:start + int(q)])
            start += int(q)


def _assign_columns(source: Dataset, config: FedDatasetConfig) -> list[np.ndarray] | None:
    if config.features_per_node is None:
        return None
    rng = substream(config.seed, "features")
    order = rng.permutation(source.n_features)
    blocks = []
    start = 0
    for count in config.features_per_node:
        blocks.append(order[start:start + int(count)])
        start += int(count)
    return blocks
