from __future__ import annotations

from dataclasses import dataclass

import pytest

import numpy as np

from smd import (
    Dataset,
    Network,
    NetworkSpec,
    SplitSpec,
    TrainConfig,
    init_network,
    make_spirals,
    split,
    train_model,
)
from smd.checkpoint import load_checkpoint, save_checkpoint


@dataclass
class Task:
    train: Dataset
    val: Dataset
    test: Dataset
    parent: Network  # checkpoint round-tripped, i.e. float32-valued


def _build_task(tmp_path, turns: float, batch_size: int, n_eval: int) -> Task:
    train = make_spirals(2500, turns=turns, seed=1)
    pool = make_spirals(n_eval, turns=turns, seed=2)
    val, test = split(pool, SplitSpec((0.5, 0.5), seed=3))
    spec = NetworkSpec([2, 64, 64, 64, 2], seed=7)
    trained = train_model(init_network(spec), train, TrainConfig(batch_size=batch_size))
    ckpt = tmp_path / f"parent_t{turns}_b{batch_size}.ckpt"
    save_checkpoint(trained, ckpt)
    return Task(train, val, test, load_checkpoint(ckpt))


@pytest.fixture(scope="session")
def spiral_task(tmp_path_factory) -> Task:
    """Default-parameter task: 1.75-turn spirals, 1000-sample eval pool."""
    return _build_task(tmp_path_factory.mktemp("spiral"), turns=1.75, batch_size=16, n_eval=1000)


@pytest.fixture(scope="session")
def bench_task(tmp_path_factory) -> Task:
    """Harder task used by the acceptance experiments: 2-turn spirals,
    batch size 8, 5000-sample eval pool (2500 validation / 2500 test)."""
    return _build_task(tmp_path_factory.mktemp("bench"), turns=2.0, batch_size=8, n_eval=5000)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
