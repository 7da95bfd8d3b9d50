"""Shared fixtures: a synthetic two-plant cascade store and a trained model.

Session-scoped where read-only so the expensive pieces (ingest, training)
run once.
"""
from __future__ import annotations

import pytest

from hydrodispatch.datastore import Store
from hydrodispatch.hydrology import generate_synthetic_cascade
from hydrodispatch.mlp import TrainConfig
from hydrodispatch.unitdispatch import train_plant_model

CASCADE_SEED = 42
CASCADE_HOURS = 4000
CASCADE_LAG = 2
CASCADE_NOISE = 0.05


@pytest.fixture(scope="session")
def cascade():
    return generate_synthetic_cascade(CASCADE_SEED, CASCADE_HOURS, CASCADE_LAG,
                                      CASCADE_NOISE)


@pytest.fixture(scope="session")
def cascade_store(cascade, tmp_path_factory):
    """Read-only store holding the synthetic cascade. Do not mutate."""
    path = tmp_path_factory.mktemp("store") / "cascade.db"
    store = Store(path)
    cascade.ingest(store)
    return store


@pytest.fixture(scope="session")
def quick_config():
    return TrainConfig(seed=42, epochs=60)


@pytest.fixture(scope="session")
def upstream_model(cascade_store, quick_config):
    return train_plant_model(cascade_store, "UP", quick_config)


@pytest.fixture()
def store(tmp_path):
    """Fresh empty store for mutation tests."""
    return Store(tmp_path / "test.db")
