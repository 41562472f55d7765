from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from jeanie.config import resolve_threads
from jeanie.core.encoders import EncodingNetwork
from jeanie.core.fewshot import SequencePool, encode_sequence, episode_distances, nearest_class, restrict_pool, sample_episode
from jeanie.data.models import AlignmentConfig, CameraPose, Episode, EpisodeOutcome, EvaluationReport, FeatureMap, ProtocolConfig
from jeanie.errors import InvalidArgument, ProtocolViolation
from jeanie.logging import logger


def _test_classes(pool: SequencePool, protocol: ProtocolConfig) -> List[str]:
    overlap = sorted(set(protocol.train_classes) & set(protocol.test_classes))
    if overlap:
        raise ProtocolViolation(f"train and test classes overlap: {', '.join(overlap)}")
    if protocol.test_classes:
        return list(protocol.test_classes)
    return [label for label in pool if label not in set(protocol.train_classes)]


def _prime_features(
    episodes: List[Episode],
    encoder: EncodingNetwork,
    protocol: ProtocolConfig,
    camera: Optional[CameraPose],
) -> Dict[Tuple[int, bool], FeatureMap]:
    """Encode every distinct sequence once, on the calling thread."""
    support_grid = protocol.support_views
    cache: Dict[Tuple[int, bool], FeatureMap] = {}
    for episode in episodes:
        key = (id(episode.query), True)
        if key not in cache:
            cache[key] = encode_sequence(episode.query, encoder, protocol.grid, camera)
        for row in episode.supports:
            for support in row:
                key = (id(support), support_grid)
                if key not in cache:
                    cache[key] = encode_sequence(support, encoder, protocol.grid if support_grid else None, camera)
    return cache


def _outcome(episode_id: int, episode: Episode, distances: np.ndarray) -> EpisodeOutcome:
    class_means = distances.mean(axis=1)
    return EpisodeOutcome(
        episode_id=episode_id,
        predicted=nearest_class(episode.class_ids, distances),
        truth=episode.truth,
        d_pos_mean=float(class_means[0]),
        d_neg_min=float(class_means[1:].min()),
    )


def summarize_outcomes(rows: List[EpisodeOutcome], diagnostics: Optional[Dict[str, object]] = None) -> EvaluationReport:
    correct = np.array([row.correct for row in rows], dtype=np.float64)
    accuracy = float(correct.mean()) if rows else 0.0
    stderr = float(correct.std(ddof=1) / np.sqrt(len(rows))) if len(rows) > 1 else 0.0
    confusion = Counter((row.truth, row.predicted) for row in rows)
    return EvaluationReport(
        accuracy=accuracy,
        stderr=stderr,
        rows=rows,
        confusion=dict(confusion),
        diagnostics=dict(diagnostics or {}),
    )


def evaluate_protocol(
    pool: SequencePool,
    protocol: ProtocolConfig,
    encoder: EncodingNetwork,
    cfg: Optional[AlignmentConfig] = None,
    camera: Optional[CameraPose] = None,
    workers: Optional[int] = None,
) -> EvaluationReport:
    cfg = cfg or protocol.alignment
    test_pool = restrict_pool(pool, _test_classes(pool, protocol))
    rng = np.random.default_rng([protocol.seed, 1])
    seeds = rng.integers(0, 2 ** 31 - 1, size=protocol.episodes)
    episodes = [sample_episode(test_pool, protocol.n_way, protocol.z_shot, int(seed)) for seed in seeds]

    encoder.eval()
    cache = _prime_features(episodes, encoder, protocol, camera)

    def run(index: int) -> EpisodeOutcome:
        episode = episodes[index]
        distances = episode_distances(
            episode, encoder, cfg, protocol.grid, camera,
            method=protocol.method,
            axes=protocol.axes,
            support_views=protocol.support_views,
            cache=cache,
        )
        return _outcome(index, episode, distances)

    worker_count = workers or resolve_threads()
    if worker_count > 1 and len(episodes) > 1:
        with ThreadPoolExecutor(max_workers=worker_count) as pool_executor:
            rows = list(pool_executor.map(run, range(len(episodes))))
    else:
        rows = [run(index) for index in range(len(episodes))]

    report = summarize_outcomes(rows, {
        'method': protocol.method,
        'n_way': protocol.n_way,
        'z_shot': protocol.z_shot,
        'test_classes': sorted(test_pool),
    })
    logger.info(
        "Evaluated %s episodes (%s): accuracy %.4f +/- %.4f",
        len(rows), protocol.method, report.accuracy, report.stderr,
    )
    return report


SWEEP_PARAMS = ('iota', 'gamma', 'step', 'eta')


def _swept(protocol: ProtocolConfig, param: str, value: float) -> ProtocolConfig:
    if param == 'iota':
        return replace(protocol, alignment=replace(protocol.alignment, iota=int(value), iota_alt=None))
    if param == 'gamma':
        return replace(protocol, alignment=replace(protocol.alignment, gamma=float(value)))
    if param == 'step':
        return replace(protocol, grid=replace(protocol.grid, step_deg=float(value)))
    if param == 'eta':
        return replace(protocol, grid=replace(protocol.grid, eta_az=int(value), eta_alt=int(value)))
    raise InvalidArgument(f"sweep parameter must be one of {', '.join(SWEEP_PARAMS)}, got {param!r}")


def sweep_protocol(
    pool: SequencePool,
    protocol: ProtocolConfig,
    encoder: EncodingNetwork,
    param: str,
    values: List[float],
    camera: Optional[CameraPose] = None,
) -> List[Tuple[float, float, str]]:
    """Accuracy for each value of one alignment or grid parameter, as plot points."""
    if not values:
        raise InvalidArgument("sweep needs at least one value")
    points: List[Tuple[float, float, str]] = []
    for value in values:
        report = evaluate_protocol(pool, _swept(protocol, param, value), encoder, camera=camera)
        points.append((float(value), report.accuracy, f"{protocol.method}:{param}"))
    return points


__all__ = ["SWEEP_PARAMS", "evaluate_protocol", "summarize_outcomes", "sweep_protocol"]
