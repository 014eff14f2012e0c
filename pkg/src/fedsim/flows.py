"""Named round steps and the aggregator family, composed from pool.map.

A training round is deploy -> local train -> collect -> aggregate ->
evaluate. Every step is deterministic given its seeds, and the aggregators
are plain functions over stacked parameter vectors so they can be tested in
isolation.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import learners
from .actors import Role
from .adversary import GAUSSIAN_NOISE, LABEL_FLIP, SIGN_FLIP, AttackSpec, ensure_attackers_known, poison_data, poison_update
from .dataset import Dataset
from .errors import (
    AllTrimmed,
    EmptyCollection,
    FedSimError,
    InvalidArgument,
    MissingKey,
    MultipleServers,
    SelectionTooLarge,
    ShapeMismatch,
)
from .learners import EvalMetrics, LearnerSpec, ParamVector, init_params
from .pool import Pool
from .rng import derive_seed, substream

FED_AVG = "fed_avg"
WEIGHTED_AVG = "weighted_avg"
CLIPPED_AVG = "clipped_avg"
COORD_MEDIAN = "coord_median"
TRIMMED_MEAN = "trimmed_mean"
AGGREGATOR_KINDS = (FED_AVG, WEIGHTED_AVG, CLIPPED_AVG, COORD_MEDIAN, TRIMMED_MEAN)


@dataclass(frozen=True)
class AggregatorSpec:
    """Aggregation rule plus its kind-specific knobs.

    clip_norm belongs to clipped_avg, trim_fraction to trimmed_mean, and
    weights/seed to weighted_avg (absent weights are redrawn uniform(0,1)
    from the seed and normalized); setting a knob on any other kind is
    rejected.
    """

    kind: str
    clip_norm: float | None = None
    trim_fraction: float | None = None
    weights: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in AGGREGATOR_KINDS:
            raise InvalidArgument(f"unknown aggregator kind {self.kind!r}")
        if self.kind == CLIPPED_AVG:
            if self.clip_norm is None or self.clip_norm <= 0:
                raise InvalidArgument("clipped_avg needs a positive clip_norm")
        elif self.clip_norm is not None:
            raise InvalidArgument("clip_norm is only valid for clipped_avg")
        if self.kind == TRIMMED_MEAN:
            if self.trim_fraction is None or not 0 <= self.trim_fraction < 0.5:
                raise InvalidArgument("trimmed_mean needs trim_fraction in [0, 0.5)")
        elif self.trim_fraction is not None:
            raise InvalidArgument("trim_fraction is only valid for trimmed_mean")
        if self.weights is not None:
            if self.kind != WEIGHTED_AVG:
                raise InvalidArgument("weights are only valid for weighted_avg")
            w = tuple(float(x) for x in self.weights)
            if any(x < 0 for x in w) or sum(w) == 0:
                raise InvalidArgument("weights must be nonnegative and not all zero")
            object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class RoundReport:
    round_index: int
    participating_ids: tuple[str, ...]
    server_loss: float
    server_accuracy: float | None
    per_client_train_loss: tuple[float, ...]
    skipped_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class RoundPlan:
    """Everything run_rounds needs besides the pool and the test set."""

    learner: LearnerSpec
    aggregator: AggregatorSpec
    rounds: int
    clients_per_round: int
    round_seed: int = 0
    attack: AttackSpec | None = None


# aggregation cores over a (k, d) stack of client vectors
#
# The mean-based cores average deltas against the first row instead of the raw
# vectors: consensus inputs then reproduce exactly and clustered inputs lose
# less precision.

def federated_average(stack: np.ndarray) -> np.ndarray:
    pivot = stack[0]
    return pivot + (stack - pivot).mean(axis=0)


def weighted_average(stack: np.ndarray, weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (stack.shape[0],):
        raise ShapeMismatch(f"{w.size} weights for {stack.shape[0]} vectors")
    if (w < 0).any() or w.sum() == 0:
        raise InvalidArgument("weights must be nonnegative and not all zero")
    w = w / w.sum()
    pivot = stack[0]
    return pivot + (w[:, None] * (stack - pivot)).sum(axis=0)


def clipped_average(current: np.ndarray, stack: np.ndarray, clip_norm: float) -> np.ndarray:
    """Mean of updates rescaled to at most clip_norm in L2, applied to current."""
    updates = stack - current
    norms = np.linalg.norm(updates, axis=1)
    with np.errstate(divide="ignore"):
        scale = np.where(norms > 0, np.minimum(1.0, clip_norm / norms), 1.0)
    return current + (updates * scale[:, None]).mean(axis=0)


def coordinate_median(stack: np.ndarray) -> np.ndarray:
    return np.median(stack, axis=0)


def trimmed_mean(stack: np.ndarray, trim_fraction: float) -> np.ndarray:
    """Per coordinate, drop the floor(trim*k) smallest and largest, then mean."""
    k = stack.shape[0]
    cut = int(trim_fraction * k)
    if 2 * cut >= k:
        raise AllTrimmed(f"trimming {cut} from each end leaves nothing of {k} vectors")
    ordered = np.sort(stack, axis=0)
    return ordered[cut:k - cut].mean(axis=0)


def _the_server(servers: Pool):
    if len(servers) != 1:
        raise MultipleServers(f"expected exactly one server actor, got {len(servers)}")
    return servers.models[servers.actor_ids[0]]


def deploy_server_model(servers: Pool, clients: Pool) -> None:
    """Copy the single server's "params" entry into every client model.

    The server initiates (permission-checked) and clients then write their
    own copy locally; parameter vectors are immutable, so later server-side
    replacement never leaks into the deployed copies.
    """
    model = _the_server(servers)
    if "params" not in model:
        raise MissingKey("server model has no 'params' entry to deploy")
    snapshot = model["params"]

    servers.map(lambda _model, _views: None, clients)  # opens the channel

    def copy_params(client_model, _data):
        client_model["params"] = snapshot

    clients.map(copy_params)


def train_clients(clients: Pool, spec: LearnerSpec) -> None:
    """Local training on each client's own dataset via self-map.

    Clients without data (or with zero samples) keep their parameters; the
    round report flags them.
    """
    def step(model, data):
        if "params" not in model:
            raise MissingKey(f"client {model.owner_id!r} has no 'params' entry")
        if data is None or data.n_samples == 0:
            return
        model["params"] = learners.train(spec, model["params"], data)

    clients.map(step)


def collect_client_params(servers: Pool, clients: Pool) -> None:
    """Gather client parameters into the server model.

    Writes "collected" (vectors in ascending client-id order), parallel
    "collected_ids", and "collected_sizes" (per-client sample counts, for
    size-weighted aggregation).
    """
    _the_server(servers)
    sizes = {aid: (clients.data[aid].n_samples if aid in clients.data else 0)
             for aid in clients.actor_ids}

    def gather(server_model, views):
        params, ids = [], []
        for view in views:
            if "params" not in view:
                raise MissingKey(f"client {view.owner_id!r} has no 'params' entry")
            params.append(view["params"])
            ids.append(view.owner_id)
        server_model["collected"] = tuple(params)
        server_model["collected_ids"] = tuple(ids)
        server_model["collected_sizes"] = tuple(sizes[i] for i in ids)

    servers.map(gather, clients)


def aggregate(servers: Pool, agg: AggregatorSpec) -> None:
    """Replace the server's "params" with the aggregate of "collected"."""
    model = _the_server(servers)
    collected = model.get("collected") or ()
    if len(collected) == 0:
        raise EmptyCollection("server has no collected parameters to aggregate")
    tags = {p.shape_tag for p in collected}
    if len(tags) != 1:
        raise ShapeMismatch(f"collected vectors have mixed shape tags {sorted(tags)}")
    tag = tags.pop()
    stack = np.stack([p.values for p in collected])

    if agg.kind == FED_AVG:
        result = federated_average(stack)
    elif agg.kind == WEIGHTED_AVG:
        if agg.weights is not None:
            weights = agg.weights
        else:
            weights = substream(agg.seed, "weighted-avg").uniform(0.0, 1.0, stack.shape[0])
        result = weighted_average(stack, weights)
    elif agg.kind == CLIPPED_AVG:
        if "params" not in model:
            raise MissingKey("clipped_avg needs current server 'params'")
        current = model["params"]
        if current.shape_tag != tag:
            raise ShapeMismatch(f"server params {current.shape_tag!r} do not match collected {tag!r}")
        result = clipped_average(current.values, stack, agg.clip_norm)
    elif agg.kind == COORD_MEDIAN:
        result = coordinate_median(stack)
    else:
        result = trimmed_mean(stack, agg.trim_fraction)

    model["params"] = ParamVector(result, tag)


def evaluate_server(servers: Pool, spec: LearnerSpec, test: Dataset) -> EvalMetrics:
    """Loss (and accuracy, when defined) of the server params on a test set."""
    model = _the_server(servers)
    if "params" not in model:
        raise MissingKey("server model has no 'params' entry to evaluate")
    return learners.evaluate(spec, model["params"], test)


def run_rounds(pool: Pool, plan: RoundPlan, test: Dataset) -> list[RoundReport]:
    """Execute plan.rounds federated rounds on the pool; one report per round.

    Requires exactly one server-aggregator actor. Per round r, the client
    cohort is sampled with a stream derived from (round_seed, r), then
    deploy / train / (poison) / collect / aggregate / evaluate run in order.
    Data poisoning, when armed, is applied to the pool once before round 0,
    so a pool should not be reused across poisoned runs. Zero rounds leave
    the pool untouched.
    """
    if plan.rounds < 0:
        raise InvalidArgument("rounds must be nonnegative")
    if plan.rounds == 0:
        return []

    atk = plan.attack
    if atk is not None:
        ensure_attackers_known(atk, pool)
        if atk.kind == LABEL_FLIP:
            poison_data(pool, atk)

    server_pool = pool.select(
        lambda _aid, roles: Role.SERVER in roles and Role.AGGREGATOR in roles)
    if len(server_pool) != 1:
        raise MultipleServers(
            f"run_rounds needs exactly one server-aggregator, found {len(server_pool)}")
    clients = pool.clients
    if plan.clients_per_round > len(clients):
        raise SelectionTooLarge(
            f"clients_per_round={plan.clients_per_round} but only {len(clients)} clients exist")

    server_model = server_pool.models[server_pool.actor_ids[0]]
    if "params" not in server_model:
        server_model["params"] = init_params(plan.learner)

    reports = []
    for r in range(plan.rounds):
        try:
            reports.append(_one_round(r, server_pool, server_model, clients, plan, test))
        except FedSimError as exc:
            raise type(exc)(f"round {r}: {exc}") from exc
    return reports


def _one_round(r: int, server_pool: Pool, server_model, clients: Pool,
               plan: RoundPlan, test: Dataset) -> RoundReport:
    selected = clients.select(plan.clients_per_round, seed=derive_seed(plan.round_seed, "round", r))
    deploy_server_model(server_pool, selected)
    deployed = server_model["params"]

    train_clients(selected, plan.learner)

    atk = plan.attack
    if atk is not None and atk.kind in (SIGN_FLIP, GAUSSIAN_NOISE):
        for aid in selected.actor_ids:
            if aid in atk.attacker_ids:
                model = selected.models[aid]
                model["params"] = poison_update(deployed, model["params"], atk, attacker_id=aid)

    collect_client_params(server_pool, selected)

    agg = plan.aggregator
    if agg.kind == WEIGHTED_AVG and agg.weights is None:
        # fresh random weights each round, still reproducible
        agg = dataclasses.replace(agg, seed=derive_seed(agg.seed, "round-weights", r))
    aggregate(server_pool, agg)

    metrics = evaluate_server(server_pool, plan.learner, test)

    losses, skipped = [], []
    for aid in selected.actor_ids:
        data = selected.data.get(aid)
        if data is None or data.n_samples == 0:
            losses.append(float("nan"))
            skipped.append(aid)
        else:
            losses.append(learners.evaluate(plan.learner, selected.models[aid]["params"], data).loss)

    return RoundReport(
        round_index=r,
        participating_ids=tuple(selected.actor_ids),
        server_loss=metrics.loss,
        server_accuracy=metrics.accuracy,
        per_client_train_loss=tuple(losses),
        skipped_ids=tuple(skipped),
    )
