"""Built-in reference learners: linear and logistic regression on flat
parameter vectors, trained with seeded mini-batch SGD.

Kept deliberately small so federated rounds are exactly testable: zero
initialization, closed-form gradients, and shuffling that depends only on
(seed, epoch) make every run a pure function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import BadLabels, EmptyDataset, InvalidArgument, NoLabels, ShapeMismatch
from .rng import substream

LINEAR = "linear_regression"
LOGISTIC = "logistic_regression"
KINDS = (LINEAR, LOGISTIC)


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Immutable flat vector of model parameters.

    shape_tag names the layout; vectors combine (average, compare) only when
    tags match. Layout here is always weights followed by one bias entry.
    """

    values: np.ndarray
    shape_tag: str

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if v.size == 0:
            raise InvalidArgument("parameter vector must be nonempty")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("parameter vector entries must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self.shape_tag == other.shape_tag and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    n_features: int
    lr: float = 0.1
    epochs: int = 1
    batch_size: int = 32
    l2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown learner kind {self.kind!r}")
        if self.n_features < 1:
            raise InvalidArgument("n_features must be positive")
        if self.lr <= 0:
            raise InvalidArgument("lr must be positive")
        if self.epochs < 0:
            raise InvalidArgument("epochs must be nonnegative")
        if self.batch_size < 1:
            raise InvalidArgument("batch_size must be at least 1")
        if self.l2 < 0:
            raise InvalidArgument("l2 must be nonnegative")

    @property
    def shape_tag(self) -> str:
        prefix = "linear" if self.kind == LINEAR else "logistic"
        return f"{prefix}:{self.n_features}+1"


@dataclass(frozen=True)
class EvalMetrics:
    loss: float
    accuracy: float | None = None


def init_params(spec: LearnerSpec) -> ParamVector:
    """Zero weights and bias, so every run starts from the same point."""
    return ParamVector(np.zeros(spec.n_features + 1), spec.shape_tag)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form is stable for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check(spec: LearnerSpec, p: ParamVector, d: Dataset) -> None:
    if d.labels is None:
        raise NoLabels("learner needs a labeled dataset")
    if d.n_features != spec.n_features:
        raise ShapeMismatch(f"dataset has {d.n_features} features, spec expects {spec.n_features}")
    if p.shape_tag != spec.shape_tag or len(p) != spec.n_features + 1:
        raise ShapeMismatch(f"params tagged {p.shape_tag!r} do not fit spec {spec.shape_tag!r}")
    if spec.kind == LOGISTIC and d.n_samples and not np.isin(d.labels, (0, 1)).all():
        raise BadLabels("logistic regression needs labels in {0, 1}")


def _loss_grad(spec: LearnerSpec, values: np.ndarray, X: np.ndarray, y: np.ndarray):
    """Mean loss over (X, y) plus L2 penalty, and its exact gradient."""
    n = X.shape[0]
    w, b = values[:-1], values[-1]
    if spec.kind == LINEAR:
        r = X @ w + b - y
        loss = float(r @ r) / n
        gw = (2.0 / n) * (X.T @ r)
        gb = (2.0 / n) * float(r.sum())
    else:
        z = X @ w + b
        # -[y log s + (1-y) log(1-s)] == softplus(z) - y z
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        delta = _sigmoid(z) - y
        gw = (X.T @ delta) / n
        gb = float(delta.mean())
    # bias excluded from regularization
    loss += 0.5 * spec.l2 * float(w @ w)
    gw = gw + spec.l2 * w
    return loss, np.append(gw, gb)


def loss_and_gradient(spec: LearnerSpec, p: ParamVector, d: Dataset) -> tuple[float, ParamVector]:
    """Mean objective over the dataset and its gradient, same shape as p."""
    _check(spec, p, d)
    if d.n_samples == 0:
        raise EmptyDataset("cannot take a mean loss over zero samples")
    y = d.labels.astype(np.float64)
    loss, grad = _loss_grad(spec, p.values, d.features, y)
    return loss, ParamVector(grad, p.shape_tag)


def train(spec: LearnerSpec, p: ParamVector, d: Dataset) -> ParamVector:
    """Mini-batch SGD for spec.epochs passes; pure in (spec, p, d).

    Each epoch shuffles rows with a stream derived from (spec.seed, epoch);
    batch_size at or above the sample count gives full-batch gradient steps.
    """
    _check(spec, p, d)
    if spec.epochs == 0:
        return p
    n = d.n_samples
    if n == 0:
        raise EmptyDataset("cannot train on zero samples")
    X = d.features
    y = d.labels.astype(np.float64)
    values = p.values.copy()
    for epoch in range(spec.epochs):
        order = substream(spec.seed, "epoch", epoch).permutation(n)
        for start in range(0, n, spec.batch_size):
            batch = order[start:start + spec.batch_size]
            _, grad = _loss_grad(spec, values, X[batch], y[batch])
            values -= spec.lr * grad
    return ParamVector(values, p.shape_tag)


def evaluate(spec: LearnerSpec, p: ParamVector, d: Dataset) -> EvalMetrics:
    """Data loss (no regularization term) and, for logistic, accuracy.

    Scores of exactly 0.5 predict class 1, so evaluation is deterministic.
    """
    _check(spec, p, d)
    if d.n_samples == 0:
        raise EmptyDataset("cannot evaluate on zero samples")
    y = d.labels.astype(np.float64)
    w, b = p.values[:-1], p.values[-1]
    if spec.kind == LINEAR:
        r = d.features @ w + b - y
        return EvalMetrics(loss=float(r @ r) / d.n_samples)
    z = d.features @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    predicted = (_sigmoid(z) >= 0.5).astype(np.float64)
    return EvalMetrics(loss=loss, accuracy=float((predicted == y).mean()))
