"""fedsim: a model-agnostic federated learning simulator.

Partition centralized datasets into realistic federated splits (sample
splits with per-class skew, disjoint feature splits, per-node label
retention), organize nodes as role-bearing actors with permission-checked
communication, and run end-to-end training rounds with pluggable and
byzantine-robust aggregators, poisoning attacks, and a reproducible batch
CLI (``fedsim run`` / ``fedsim partition inspect``).
"""

from fedsim.actors import (
    Role,
    can_initiate,
    client_server_architecture,
    p2p_architecture,
)
from fedsim.adversary import AttackSpec, attach_attack, poison_data, poison_update
from fedsim.dataset import (
    Dataset,
    LabelSummary,
    generate_blobs,
    load_csv,
    summarize_labels,
    write_csv,
)
from fedsim.errors import FedSimError
from fedsim.flows import (
    AggregatorSpec,
    RoundPlan,
    RoundReport,
    aggregate,
    collect_client_params,
    deploy_server_model,
    evaluate_server,
    run_rounds,
    train_clients,
)
from fedsim.learners import (
    EvalMetrics,
    LearnerSpec,
    ParamVector,
    evaluate,
    init_params,
    loss_and_gradient,
    train,
)
from fedsim.partition import (
    FedDatasetConfig,
    apportion,
    classes_to_weights,
    from_config,
)
from fedsim.pool import ModelStore, ModelView, Pool

__all__ = [
    "AggregatorSpec", "AttackSpec", "Dataset", "EvalMetrics", "FedDatasetConfig",
    "FedSimError", "LabelSummary", "LearnerSpec", "ModelStore", "ModelView",
    "ParamVector", "Pool", "Role", "RoundPlan", "RoundReport",
    "aggregate", "apportion", "attach_attack", "can_initiate",
    "classes_to_weights", "client_server_architecture", "collect_client_params",
    "deploy_server_model", "evaluate", "evaluate_server", "from_config",
    "generate_blobs", "init_params", "load_csv", "loss_and_gradient",
    "p2p_architecture", "poison_data", "poison_update", "run_rounds",
    "summarize_labels", "train", "train_clients", "write_csv",
]

__version__ = "0.1.0"
