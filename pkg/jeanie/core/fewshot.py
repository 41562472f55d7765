from __future__ import annotations

from typing import Any, Dict, Iterable, List, Mapping, MutableMapping, Optional, Sequence, Tuple

import numpy as np
import torch

from jeanie.core.alignment import aligned_distance, distance_tensor
from jeanie.core.encoders import EncodingNetwork, encode_feature_map
from jeanie.core.geometry import generate_view_grid
from jeanie.core.skeleton import normalize_sequence, split_blocks
from jeanie.data.models import (
    AlignmentConfig,
    CameraPose,
    Episode,
    FeatureMap,
    LossConfig,
    SkeletonSequence,
    ViewGrid,
)
from jeanie.errors import InvalidArgument

SequencePool = Mapping[str, Sequence[SkeletonSequence]]


# ============================================================
# Pools and episodes
# ============================================================
def build_pool(sequences: Iterable[SkeletonSequence]) -> Dict[str, List[SkeletonSequence]]:
    pool: Dict[str, List[SkeletonSequence]] = {}
    for seq in sequences:
        if seq.label is None:
            raise InvalidArgument("every pooled sequence needs a class label")
        pool.setdefault(str(seq.label), []).append(seq)
    return {label: pool[label] for label in sorted(pool)}


def restrict_pool(pool: SequencePool, classes: Iterable[str]) -> Dict[str, List[SkeletonSequence]]:
    wanted = set(classes)
    missing = sorted(wanted - set(pool))
    if missing:
        raise InvalidArgument(f"classes not present in the data: {', '.join(missing)}")
    return {label: list(pool[label]) for label in sorted(wanted)}


def sample_episode(pool: SequencePool, n_way: int, z_shot: int, rng_seed: int) -> Episode:
    """Draw N classes uniformly; the first one supplies the query and the positive supports."""
    if n_way < 2 or z_shot < 1:
        raise InvalidArgument(f"episodes need N >= 2 and Z >= 1, got N={n_way}, Z={z_shot}")
    eligible = sorted(label for label, items in pool.items() if len(items) >= z_shot + 1)
    if len(eligible) < n_way:
        raise InvalidArgument(
            f"pool has {len(eligible)} classes with >= {z_shot + 1} samples, {n_way} needed"
        )

    rng = np.random.default_rng(int(rng_seed))
    classes = [eligible[int(i)] for i in rng.choice(len(eligible), size=n_way, replace=False)]

    positive = pool[classes[0]]
    picks = rng.choice(len(positive), size=z_shot + 1, replace=False)
    query = positive[int(picks[0])]
    supports = [[positive[int(i)] for i in picks[1:]]]
    for label in classes[1:]:
        items = pool[label]
        supports.append([items[int(i)] for i in rng.choice(len(items), size=z_shot, replace=False)])
    return Episode(query=query, supports=supports, class_ids=classes, seed=int(rng_seed))


# ============================================================
# Loss
# ============================================================
def similarity_loss(
    d_pos: Any,
    d_neg: Any,
    cfg: LossConfig,
    n_way: int,
    z_shot: int,
) -> torch.Tensor:
    pos = torch.as_tensor(d_pos, dtype=torch.float64).reshape(-1)
    neg = torch.as_tensor(d_neg, dtype=torch.float64).reshape(-1)
    if pos.numel() == 0 or neg.numel() == 0:
        raise InvalidArgument("positive and negative distance sets must be non-empty")

    psi_pos = pos.mean()
    psi_neg = neg.mean()
    if cfg.variant == 'V1':
        return psi_pos ** 2 + (psi_neg - cfg.c) ** 2
    if cfg.variant == 'V2':
        return psi_pos.abs() + (psi_neg - cfg.c).abs()

    k_pos = int(cfg.beta)
    k_neg = int(n_way) * int(z_shot) * int(cfg.beta)
    if k_pos > pos.numel():
        raise InvalidArgument(f"beta={cfg.beta} exceeds the {pos.numel()} positive distances")
    if k_neg > neg.numel():
        raise InvalidArgument(f"N*Z*beta={k_neg} exceeds the {neg.numel()} negative distances")

    # hardest positives (smallest) and hardest negatives (largest) act as fixed targets
    target_pos = torch.topk(pos, k_pos, largest=False).values.mean().detach()
    target_neg = torch.topk(neg, k_neg, largest=True).values.mean().detach()
    return (psi_pos - target_pos) ** 2 + (psi_neg - target_neg) ** 2


# ============================================================
# Encoding and classification
# ============================================================
def encode_sequence(
    seq: SkeletonSequence,
    encoder: EncodingNetwork,
    grid: Optional[ViewGrid] = None,
    camera: Optional[CameraPose] = None,
    train_mode: bool = False,
) -> FeatureMap:
    """Normalize, simulate the view grid (if any), split into blocks and encode."""
    base = normalize_sequence(seq)
    views = generate_view_grid(base, grid, camera) if grid is not None else [base]
    blocks = [split_blocks(view, encoder.config.block_size, encoder.config.stride) for view in views]
    return encode_feature_map(blocks, encoder, train_mode, grid.shape if grid is not None else (1, 1))


def _class_index(class_id: str) -> Tuple[int, int, str]:
    """Sort key: numeric ids by value, then everything else by string order."""
    text = str(class_id).strip()
    if text.lstrip('-').isdigit():
        return (0, int(text), text)
    return (1, 0, text)


def nearest_class(class_ids: Sequence[str], distances: np.ndarray) -> str:
    """Argmin of the mean distance over shots; ties go to the lowest class index."""
    means = np.asarray(distances, dtype=np.float64).mean(axis=1)
    best = float(means.min())
    return min((cid for cid, value in zip(class_ids, means) if value == best), key=_class_index)



def episode_distances(
    episode: Episode,
    encoder: EncodingNetwork,
    cfg: AlignmentConfig,
    grid: ViewGrid,
    camera: Optional[CameraPose] = None,
    method: str = 'jeanie',
    axes: int = 2,
    support_views: bool = False,
    cache: Optional[MutableMapping[Tuple[int, bool], FeatureMap]] = None,
) -> np.ndarray:
    """(N, Z) alignment distances between the query and every support."""
    features = cache if cache is not None else {}
    support_grid = grid if support_views else None

    def feature(seq: SkeletonSequence, with_grid: Optional[ViewGrid]) -> FeatureMap:
        key = (id(seq), with_grid is not None)
        if key not in features:
            features[key] = encode_sequence(seq, encoder, with_grid, camera)
        return features[key]

    query = feature(episode.query, grid)
    out = np.zeros((episode.n_way, episode.z_shot))
    with torch.no_grad():
        for n, row in enumerate(episode.supports):
            for z, support in enumerate(row):
                d = distance_tensor(query, feature(support, support_grid), cfg)
                out[n, z] = float(aligned_distance(d, cfg, method, axes))
    return out


def classify_query(
    episode: Episode,
    cfg: AlignmentConfig,
    encoder: EncodingNetwork,
    grid: Optional[ViewGrid] = None,
    camera: Optional[CameraPose] = None,
    method: str = 'jeanie',
    axes: int = 2,
    support_views: bool = False,
) -> str:
    distances = episode_distances(
        episode, encoder, cfg, grid or ViewGrid.single(), camera, method, axes, support_views,
    )
    return nearest_class(episode.class_ids, distances)


__all__ = [
    "SequencePool",
    "build_pool",
    "classify_query",
    "encode_sequence",
    "episode_distances",
    "nearest_class",
    "restrict_pool",
    "sample_episode",
    "similarity_loss",
]
