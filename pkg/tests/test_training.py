from __future__ import annotations

import numpy as np
import pytest
import torch

from jeanie.core import training
from jeanie.core.encoders import EncodingNetwork
from jeanie.core.fewshot import build_pool
from jeanie.core.synthetic import generate_synthetic
from jeanie.core.training import train_episodic
from jeanie.data.models import AlignmentConfig, EncoderConfig, LossConfig, TrainConfig, ViewGrid
from jeanie.errors import TrainingDiverged

SMALL = EncoderConfig(block_size=4, stride=4, feature_dim=6, output_dim=5, layers=2, dropout=0.0, init_std=0.1, seed=5)
CFG = AlignmentConfig(gamma=0.1, iota=1)


@pytest.fixture(scope='module')
def pool():
    return build_pool(
        generate_synthetic(class_id, 8, view_perturb=10.0, rng_seed=seed)
        for class_id in range(4)
        for seed in range(3)
    )


def _snapshot(encoder: EncodingNetwork):
    return {name: tensor.clone() for name, tensor in encoder.state_dict().items()}


def test_zero_learning_rate_leaves_parameters(pool):
    encoder = EncodingNetwork(SMALL)
    before = _snapshot(encoder)
    config = TrainConfig(n_way=2, z_shot=1, batch=2, episodes=4, lr=0.0, weight_decay=0.0, seed=1)
    _, trace = train_episodic(pool, config, encoder, CFG)
    assert len(trace) == 2
    for name, tensor in encoder.state_dict().items():
        torch.testing.assert_close(tensor, before[name], rtol=0.0, atol=0.0)


def test_same_seed_gives_same_trace(pool):
    config = TrainConfig(n_way=2, z_shot=1, batch=2, episodes=6, lr=0.01, seed=7)
    _, first = train_episodic(pool, config, EncodingNetwork(SMALL), CFG)
    _, second = train_episodic(pool, config, EncodingNetwork(SMALL), CFG)
    assert first == second
    assert all(np.isfinite(first))


def test_fixed_batch_loss_goes_down(pool):
    config = TrainConfig(
        n_way=2, z_shot=1, batch=2, episodes=40, lr=0.01, weight_decay=0.0, seed=2,
        loss=LossConfig(variant='V1', c=1.0), fixed_batch=True,
    )
    _, trace = train_episodic(pool, config, EncodingNetwork(SMALL), CFG)
    assert len(trace) == 20
    assert trace[-1] < trace[0]


def test_view_grid_and_fvm_training_runs(pool):
    config = TrainConfig(n_way=2, z_shot=1, batch=2, episodes=2, lr=0.01, seed=3)
    grid = ViewGrid(eta_az=1, eta_alt=0)
    _, trace = train_episodic(pool, config, EncodingNetwork(SMALL), CFG, grid=grid, method='fvm')
    assert len(trace) == 1 and np.isfinite(trace[0])
    _, trace = train_episodic(pool, config, EncodingNetwork(SMALL), CFG, grid=grid, support_views=True)
    assert len(trace) == 1 and np.isfinite(trace[0])


def test_non_finite_loss_stops_training(pool, monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setattr(training, 'similarity_loss', lambda *args: torch.tensor(float('nan'), dtype=torch.float64))
    config = TrainConfig(n_way=2, z_shot=1, batch=2, episodes=4, seed=1)
    with pytest.raises(TrainingDiverged) as excinfo:
        train_episodic(pool, config, EncodingNetwork(SMALL), CFG)
    state = excinfo.value.state
    assert state['step'] == 0
    assert len(state['d_pos']) == 2 and len(state['d_neg']) == 2
    assert 'head.weight' in state['parameter_norms']


def test_zero_episodes_is_a_no_op(pool):
    encoder = EncodingNetwork(SMALL)
    before = _snapshot(encoder)
    trained, trace = train_episodic(pool, TrainConfig(episodes=0), encoder)
    assert trace == []
    assert trained is encoder and not trained.training
    for name, tensor in trained.state_dict().items():
        torch.testing.assert_close(tensor, before[name], rtol=0.0, atol=0.0)
