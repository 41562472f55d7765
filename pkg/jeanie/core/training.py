from __future__ import annotations

import math
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import torch

from jeanie.config import APP_CONFIG
from jeanie.core.alignment import aligned_distance, distance_tensor
from jeanie.core.encoders import EncodingNetwork
from jeanie.core.fewshot import SequencePool, encode_sequence, sample_episode, similarity_loss
from jeanie.data.models import AlignmentConfig, CameraPose, Episode, TrainConfig, ViewGrid
from jeanie.errors import TrainingDiverged
from jeanie.logging import logger


def _batch_distances(
    episodes: List[Episode],
    encoder: EncodingNetwork,
    cfg: AlignmentConfig,
    grid: ViewGrid,
    camera: Optional[CameraPose],
    method: str,
    axes: int,
    support_views: bool,
) -> Tuple[torch.Tensor, torch.Tensor]:
    support_grid = grid if support_views else None
    d_pos: List[torch.Tensor] = []
    d_neg: List[torch.Tensor] = []
    for episode in episodes:
        query = encode_sequence(episode.query, encoder, grid, camera, train_mode=True)
        for n, row in enumerate(episode.supports):
            for support in row:
                feature = encode_sequence(support, encoder, support_grid, camera, train_mode=True)
                value = aligned_distance(distance_tensor(query, feature, cfg), cfg, method, axes)
                (d_pos if n == 0 else d_neg).append(value)
    return torch.stack(d_pos), torch.stack(d_neg)


def _dump_state(step: int, encoder: EncodingNetwork, d_pos: torch.Tensor, d_neg: torch.Tensor, trace: List[float]) -> Dict[str, Any]:
    norms = {
        name: float(param.detach().norm())
        for name, param in encoder.named_parameters()
    }
    return {
        'step': step,
        'd_pos': d_pos.detach().tolist(),
        'd_neg': d_neg.detach().tolist(),
        'parameter_norms': norms,
        'loss_trace_tail': trace[-10:],
    }


def train_episodic(
    pool: SequencePool,
    config: TrainConfig,
    encoder: EncodingNetwork,
    cfg: Optional[AlignmentConfig] = None,
    grid: Optional[ViewGrid] = None,
    camera: Optional[CameraPose] = None,
    method: str = 'jeanie',
    axes: int = 2,
    support_views: bool = False,
) -> Tuple[EncodingNetwork, List[float]]:
    """Episodic SGD on the similarity loss; one loss value per mini-batch."""
    cfg = cfg or AlignmentConfig()
    grid = grid or ViewGrid.single()
    steps = math.ceil(config.episodes / config.batch) if config.episodes > 0 else 0

    torch.manual_seed(config.seed)
    episode_rng = np.random.default_rng(config.seed)
    optimizer = torch.optim.SGD(encoder.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    log_every = max(1, int(APP_CONFIG['LOG_EVERY']))

    trace: List[float] = []
    fixed: Optional[List[Episode]] = None
    logger.info(
        "Training %s steps of %s episodes (%s-way %s-shot, method=%s)",
        steps, config.batch, config.n_way, config.z_shot, method,
    )
    for step in range(steps):
        if fixed is not None:
            episodes = fixed
        else:
            seeds = episode_rng.integers(0, 2 ** 31 - 1, size=config.batch)
            episodes = [sample_episode(pool, config.n_way, config.z_shot, int(seed)) for seed in seeds]
            if config.fixed_batch:
                fixed = episodes

        optimizer.zero_grad()
        d_pos, d_neg = _batch_distances(episodes, encoder, cfg, grid, camera, method, axes, support_views)
        loss = similarity_loss(d_pos, d_neg, config.loss, config.n_way, config.z_shot)
        if not torch.isfinite(loss):
            state = _dump_state(step, encoder, d_pos, d_neg, trace)
            logger.error("Loss became non-finite at step %s: %s", step, state)
            raise TrainingDiverged(f"loss is {float(loss)} at step {step}", state)

        loss.backward()
        if config.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(encoder.parameters(), config.grad_clip)
        optimizer.step()
        trace.append(float(loss.item()))

        if step % log_every == 0 or step == steps - 1:
            logger.info("step %s/%s loss=%.6g", step + 1, steps, trace[-1])

    encoder.eval()
    return encoder, trace


__all__ = ["train_episodic"]
