"""Batch experiment runner.

Reads one JSON config describing dataset, partition, architecture, learner,
aggregator, optional attack and run settings; executes the federated rounds;
writes metrics.csv, final_params.txt and a resolved_config.json echo. Exit
codes: 0 success, 2 config/validation error, 1 runtime error. Validation
failures print one error line, never a stack trace.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import flows, partition
from .actors import Role, client_server_architecture, p2p_architecture
from .adversary import AttackSpec
from .dataset import Dataset, generate_blobs, load_csv
from .errors import (
    FedSimError,
    InvalidArgument,
    IoError,
    MultipleServers,
    NoLabels,
    ShapeMismatch,
    UnknownAttacker,
)
from .flows import AggregatorSpec, RoundPlan
from .learners import LearnerSpec
from .partition import FedDatasetConfig
from .pool import Pool
from .rng import substream

_REQUIRED = object()

METRICS_HEADER = "round,participants,server_loss,server_accuracy,mean_client_loss"
INSPECT_HEADER = "node_id,kind,class,count,n_features,has_labels"


@dataclass
class RunSection:
    rounds: int
    clients_per_round: int
    round_seed: int = 0
    test_fraction: float = 0.2


@dataclass
class ExperimentConfig:
    dataset: dict
    partition: FedDatasetConfig
    architecture: dict
    learner: LearnerSpec
    aggregator: AggregatorSpec
    run: RunSection
    attack: AttackSpec | None = None


def _check_keys(section: dict, allowed, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise InvalidArgument(f"unknown key(s) {unknown} in section {where!r}")


def _take(section: dict, key: str, where: str, default=_REQUIRED):
    if key in section:
        return section[key]
    if default is _REQUIRED:
        raise InvalidArgument(f"section {where!r} is missing required key {key!r}")
    return default


def _parse_dataset(section: dict) -> dict:
    kind = _take(section, "kind", "dataset")
    if kind == "blobs":
        _check_keys(section, ("kind", "n_samples", "n_features", "n_classes",
                              "class_separation", "seed"), "dataset")
        return {
            "kind": "blobs",
            "n_samples": int(_take(section, "n_samples", "dataset")),
            "n_features": int(_take(section, "n_features", "dataset")),
            "n_classes": int(_take(section, "n_classes", "dataset")),
            "class_separation": float(_take(section, "class_separation", "dataset")),
            "seed": int(_take(section, "seed", "dataset", 0)),
        }
    if kind == "csv":
        _check_keys(section, ("kind", "path", "label_column", "has_header"), "dataset")
        return {
            "kind": "csv",
            "path": str(_take(section, "path", "dataset")),
            "label_column": _take(section, "label_column", "dataset", None),
            "has_header": bool(_take(section, "has_header", "dataset", True)),
        }
    raise InvalidArgument(f"dataset kind must be 'blobs' or 'csv', got {kind!r}")


def _parse_partition(section: dict) -> FedDatasetConfig:
    _check_keys(section, ("seed", "n_nodes", "node_ids", "replacement", "weights",
                          "weights_per_class", "features_per_node", "keep_labels"),
                "partition")
    node_ids = section.get("node_ids")
    return FedDatasetConfig(
        seed=int(section.get("seed", 0)),
        n_nodes=int(section.get("n_nodes", 1)),
        node_ids=None if node_ids is None else [str(i) for i in node_ids],
        replacement=bool(section.get("replacement", False)),
        weights=section.get("weights"),
        weights_per_class=section.get("weights_per_class"),
        features_per_node=section.get("features_per_node"),
        keep_labels=section.get("keep_labels"),
    )


def _parse_architecture(section: dict) -> dict:
    _check_keys(section, ("kind", "server_id"), "architecture")
    kind = _take(section, "kind", "architecture")
    if kind not in ("client_server", "p2p"):
        raise InvalidArgument(f"architecture kind must be 'client_server' or 'p2p', got {kind!r}")
    out = {"kind": kind}
    if kind == "client_server":
        out["server_id"] = str(section.get("server_id", "server"))
    elif "server_id" in section:
        raise InvalidArgument("server_id is only valid for client_server architectures")
    return out


def _parse_learner(section: dict) -> LearnerSpec:
    _check_keys(section, ("kind", "n_features", "lr", "epochs", "batch_size", "l2", "seed"),
                "learner")
    return LearnerSpec(
        kind=_take(section, "kind", "learner"),
        n_features=int(_take(section, "n_features", "learner")),
        lr=float(section.get("lr", 0.1)),
        epochs=int(section.get("epochs", 1)),
        batch_size=int(section.get("batch_size", 32)),
        l2=float(section.get("l2", 0.0)),
        seed=int(section.get("seed", 0)),
    )


def _parse_aggregator(section: dict) -> AggregatorSpec:
    _check_keys(section, ("kind", "clip_norm", "trim_fraction", "weights", "seed"),
                "aggregator")
    weights = section.get("weights")
    return AggregatorSpec(
        kind=_take(section, "kind", "aggregator"),
        clip_norm=section.get("clip_norm"),
        trim_fraction=section.get("trim_fraction"),
        weights=None if weights is None else tuple(float(w) for w in weights),
        seed=int(section.get("seed", 0)),
    )


def _parse_attack(section: dict) -> AttackSpec:
    _check_keys(section, ("kind", "attacker_ids", "flip_map", "scale", "seed"), "attack")
    flip_map = section.get("flip_map")
    if flip_map is not None:
        flip_map = {int(k): int(v) for k, v in flip_map.items()}
    return AttackSpec(
        kind=_take(section, "kind", "attack"),
        attacker_ids=tuple(str(i) for i in _take(section, "attacker_ids", "attack")),
        flip_map=flip_map,
        scale=float(section.get("scale", 1.0)),
        seed=int(section.get("seed", 0)),
    )


def _parse_run(section: dict) -> RunSection:
    _check_keys(section, ("rounds", "clients_per_round", "round_seed", "test_fraction"), "run")
    return RunSection(
        rounds=int(_take(section, "rounds", "run")),
        clients_per_round=int(_take(section, "clients_per_round", "run")),
        round_seed=int(section.get("round_seed", 0)),
        test_fraction=float(section.get("test_fraction", 0.2)),
    )


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise InvalidArgument("config root must be a JSON object")
    _check_keys(raw, ("dataset", "partition", "architecture", "learner",
                      "aggregator", "attack", "run"), "<root>")
    for name in ("dataset", "partition", "architecture", "learner", "aggregator", "run"):
        if name not in raw:
            raise InvalidArgument(f"config is missing the {name!r} section")
    return ExperimentConfig(
        dataset=_parse_dataset(raw["dataset"]),
        partition=_parse_partition(raw["partition"]),
        architecture=_parse_architecture(raw["architecture"]),
        learner=_parse_learner(raw["learner"]),
        aggregator=_parse_aggregator(raw["aggregator"]),
        run=_parse_run(raw["run"]),
        attack=_parse_attack(raw["attack"]) if raw.get("attack") is not None else None,
    )


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Resolved config as plain JSON-ready data; parse_config inverts this."""
    p = cfg.partition
    out = {
        "dataset": dict(cfg.dataset),
        "partition": {
            "seed": p.seed,
            "n_nodes": p.n_nodes,
            "node_ids": p.node_ids,
            "replacement": p.replacement,
            "weights": p.weights,
            "weights_per_class": p.weights_per_class,
            "features_per_node": p.features_per_node,
            "keep_labels": p.keep_labels,
        },
        "architecture": dict(cfg.architecture),
        "learner": {
            "kind": cfg.learner.kind,
            "n_features": cfg.learner.n_features,
            "lr": cfg.learner.lr,
            "epochs": cfg.learner.epochs,
            "batch_size": cfg.learner.batch_size,
            "l2": cfg.learner.l2,
            "seed": cfg.learner.seed,
        },
        "aggregator": {
            "kind": cfg.aggregator.kind,
            "clip_norm": cfg.aggregator.clip_norm,
            "trim_fraction": cfg.aggregator.trim_fraction,
            "weights": None if cfg.aggregator.weights is None else list(cfg.aggregator.weights),
            "seed": cfg.aggregator.seed,
        },
        "run": {
            "rounds": cfg.run.rounds,
            "clients_per_round": cfg.run.clients_per_round,
            "round_seed": cfg.run.round_seed,
            "test_fraction": cfg.run.test_fraction,
        },
    }
    # drop unset optionals so the echo stays tidy and reparses cleanly
    out["partition"] = {k: v for k, v in out["partition"].items() if v is not None}
    out["aggregator"] = {k: v for k, v in out["aggregator"].items() if v is not None}
    if cfg.attack is not None:
        atk = {
            "kind": cfg.attack.kind,
            "attacker_ids": list(cfg.attack.attacker_ids),
            "scale": cfg.attack.scale,
            "seed": cfg.attack.seed,
        }
        if cfg.attack.flip_map is not None:
            atk["flip_map"] = {str(k): v for k, v in cfg.attack.flip_map.items()}
        out["attack"] = atk
    return out


def build_dataset(section: dict) -> Dataset:
    if section["kind"] == "blobs":
        return generate_blobs(section["n_samples"], section["n_features"],
                              section["n_classes"], section["class_separation"],
                              section["seed"])
    return load_csv(section["path"], section["label_column"], section["has_header"])


def split_train_test(source: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle split; the test slice goes to the server for evaluation."""
    if not 0.0 < fraction < 1.0:
        raise InvalidArgument(f"test_fraction must lie in (0, 1), got {fraction:g}")
    n = source.n_samples
    n_test = int(round(fraction * n))
    if n_test == 0 or n_test == n:
        raise InvalidArgument(f"test_fraction {fraction:g} leaves an empty train or test split")
    order = substream(seed, "test-split").permutation(n)
    test = source.take_rows(np.sort(order[:n_test]))
    train = source.take_rows(np.sort(order[n_test:]))
    return train, test


def build_architecture(arch: dict, node_ids: list[str]):
    if arch["kind"] == "client_server":
        return client_server_architecture(node_ids, arch["server_id"])
    return p2p_architecture(node_ids)


def _validate_run(cfg: ExperimentConfig, train: Dataset) -> None:
    """Referential checks that need the concrete (already split) dataset."""
    if train.labels is None:
        raise NoLabels("running an experiment requires a labeled dataset")
    partition.validate(cfg.partition, train)

    if cfg.learner.n_features != train.n_features:
        raise ShapeMismatch(
            f"learner expects {cfg.learner.n_features} features, dataset has {train.n_features}")
    if cfg.partition.features_per_node is not None:
        bad = [c for c in cfg.partition.features_per_node if int(c) != cfg.learner.n_features]
        if bad:
            raise ShapeMismatch(
                "feature-partitioned nodes do not match the learner's n_features; "
                "use 'partition inspect' for feature-split configs")
    if cfg.partition.keep_labels is not None and not all(cfg.partition.keep_labels):
        raise NoLabels("every node must keep labels to train; label-free nodes are inspect-only")

    node_ids = cfg.partition.resolved_node_ids()
    actors = build_architecture(cfg.architecture, node_ids)
    server_aggregators = [aid for aid, roles in actors.items()
                          if Role.SERVER in roles and Role.AGGREGATOR in roles]
    if len(server_aggregators) != 1:
        raise MultipleServers(
            f"running rounds needs exactly one server-aggregator actor, "
            f"this architecture has {len(server_aggregators)}")
    n_clients = sum(1 for roles in actors.values() if Role.CLIENT in roles)
    if not 1 <= cfg.run.clients_per_round <= n_clients:
        raise InvalidArgument(
            f"clients_per_round must lie in [1, {n_clients}], got {cfg.run.clients_per_round}")
    if cfg.run.rounds < 0:
        raise InvalidArgument("rounds must be nonnegative")

    if cfg.attack is not None:
        unknown = [a for a in cfg.attack.attacker_ids if a not in node_ids]
        if unknown:
            raise UnknownAttacker(f"attacker id(s) {unknown} are not partition nodes")


def _fail(exc: Exception, code: int) -> int:
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"config {path} is not valid JSON: {exc}") from exc


def _fmt_float(x) -> str:
    return repr(float(x))


def _write_metrics(path: Path, reports) -> None:
    lines = [METRICS_HEADER]
    for rep in reports:
        mean_loss = float(np.nanmean(rep.per_client_train_loss)) \
            if np.isfinite(rep.per_client_train_loss).any() else float("nan")
        acc = "" if rep.server_accuracy is None else _fmt_float(rep.server_accuracy)
        lines.append(",".join([
            str(rep.round_index),
            ";".join(rep.participating_ids),
            _fmt_float(rep.server_loss),
            acc,
            _fmt_float(mean_loss),
        ]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_params(path: Path, params) -> None:
    lines = [params.shape_tag] + [_fmt_float(v) for v in params.values]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_run(config_path, out_dir, seed_override: int | None = None) -> int:
    try:
        cfg = parse_config(_load_json(config_path))
        if seed_override is not None:
            cfg.partition.seed = int(seed_override)
            cfg.run.round_seed = int(seed_override)
        source = build_dataset(cfg.dataset)
        train, test = split_train_test(source, cfg.run.test_fraction, cfg.partition.seed)
        _validate_run(cfg, train)
    except FedSimError as exc:
        return _fail(exc, 2)

    try:
        fed = partition.from_config(train, cfg.partition)
        actors = build_architecture(cfg.architecture, cfg.partition.resolved_node_ids())
        pool = Pool.from_federated(fed, actors)
        plan = RoundPlan(
            learner=cfg.learner,
            aggregator=cfg.aggregator,
            rounds=cfg.run.rounds,
            clients_per_round=cfg.run.clients_per_round,
            round_seed=cfg.run.round_seed,
            attack=cfg.attack,
        )
        reports = flows.run_rounds(pool, plan, test)

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_metrics(out / "metrics.csv", reports)
        server_id = pool.select(
            lambda _aid, roles: Role.SERVER in roles and Role.AGGREGATOR in roles).actor_ids[0]
        _write_params(out / "final_params.txt", pool.models[server_id]["params"])
        with open(out / "resolved_config.json", "w", encoding="utf-8") as fh:
            json.dump(config_to_dict(cfg), fh, indent=2)
            fh.write("\n")
    except (FedSimError, OSError) as exc:
        return _fail(exc, 1)
    return 0


def cmd_partition_inspect(config_path, out_path) -> int:
    """Write one CSV row per (node, class) plus per-node totals.

    Enough to verify quota, feature-disjointness and label-retention claims
    about a split without loading it programmatically.
    """
    try:
        raw = _load_json(config_path)
        if not isinstance(raw, dict) or "dataset" not in raw or "partition" not in raw:
            raise InvalidArgument("partition inspect needs 'dataset' and 'partition' sections")
        dataset_section = _parse_dataset(raw["dataset"])
        part_cfg = _parse_partition(raw["partition"])
        source = build_dataset(dataset_section)
        partition.validate(part_cfg, source)
    except FedSimError as exc:
        return _fail(exc, 2)

    try:
        fed = partition.from_config(source, part_cfg)
        source_classes = [] if source.labels is None else list(np.unique(source.labels))
        lines = [INSPECT_HEADER]
        for nid in part_cfg.resolved_node_ids():
            node = fed[nid]
            flag = "true" if node.has_labels else "false"
            lines.append(f"{nid},total,,{node.n_samples},{node.n_features},{flag}")
            if node.has_labels:
                for cls in source_classes:
                    count = int((node.labels == cls).sum())
                    lines.append(f"{nid},class,{cls},{count},,")
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except (FedSimError, OSError) as exc:
        return _fail(exc, 1)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fedsim",
        description="Federated learning simulator: partition data, run rounds, inspect splits.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment config end to end")
    run_p.add_argument("--config", required=True, help="path to the JSON experiment config")
    run_p.add_argument("--out", required=True, help="output directory for metrics and params")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override both the partition seed and the round seed")

    part_p = sub.add_parser("partition", help="partition utilities")
    part_sub = part_p.add_subparsers(dest="subcommand", required=True)
    insp = part_sub.add_parser("inspect", help="summarize the split a config produces")
    insp.add_argument("--config", required=True, help="path to the JSON experiment config")
    insp.add_argument("--out", required=True, help="output CSV path")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.seed)
    return cmd_partition_inspect(args.config, args.out)


if __name__ == "__main__":
    raise SystemExit(main())
