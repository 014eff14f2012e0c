from __future__ import annotations

import numpy as np
import pytest

from fedsim import (
    FedDatasetConfig,
    Pool,
    client_server_architecture,
    from_config,
    generate_blobs,
)


def split_blobs(n_samples, n_features, n_classes, separation, seed, test_fraction=0.2):
    """One blob source split into (train, test) by a deterministic tail cut."""
    source = generate_blobs(n_samples, n_features, n_classes, separation, seed)
    n_test = int(round(test_fraction * n_samples))
    return source.take_rows(range(n_samples - n_test)), source.take_rows(
        range(n_samples - n_test, n_samples))


def make_cs_pool(train, n_clients, part_seed=1, server_id="server", init=None):
    """Client-server pool over an equal-share split of ``train``."""
    cfg = FedDatasetConfig(seed=part_seed, n_nodes=n_clients)
    fed = from_config(train, cfg)
    actors = client_server_architecture(list(fed), server_id)
    return Pool.from_federated(fed, actors, init)


@pytest.fixture
def binary_blobs():
    return split_blobs(1000, 2, 2, 10.0, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
