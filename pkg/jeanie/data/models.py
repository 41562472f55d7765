from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

import numpy as np
import torch

from jeanie.config import APP_CONFIG, DEFAULT_SKELETON
from jeanie.errors import InvalidArgument

ViewMode = Literal['EULER', 'CAMVPC']
BaseDistance = Literal['EUCLIDEAN', 'RBF']
GnnVariant = Literal['GCN', 'SGC', 'APPNP', 'S2GC']
LossVariant = Literal['MAIN', 'V1', 'V2']
AlignMethod = Literal['jeanie', 'softdtw', 'fvm']

VIEW_MODES = ('EULER', 'CAMVPC')
BASE_DISTANCES = ('EUCLIDEAN', 'RBF')
GNN_VARIANTS = ('GCN', 'SGC', 'APPNP', 'S2GC')
LOSS_VARIANTS = ('MAIN', 'V1', 'V2')
ALIGN_METHODS = ('jeanie', 'softdtw', 'fvm')


def _pick(data: Mapping[str, Any], key: str, default: Any) -> Any:
    value = data.get(key)
    return default if value is None else value


def _as_int(value: Any, name: str) -> int:
    if isinstance(value, bool):
        raise InvalidArgument(f"{name} must be an integer, got {value!r}")
    try:
        parsed = int(value)
    except (TypeError, ValueError):
        raise InvalidArgument(f"{name} must be an integer, got {value!r}") from None
    if parsed != value and not isinstance(value, str):
        raise InvalidArgument(f"{name} must be an integer, got {value!r}")
    return parsed


def _as_float(value: Any, name: str) -> float:
    try:
        parsed = float(value)
    except (TypeError, ValueError):
        raise InvalidArgument(f"{name} must be a number, got {value!r}") from None
    if not np.isfinite(parsed):
        raise InvalidArgument(f"{name} must be finite, got {value!r}")
    return parsed


def _as_choice(value: Any, name: str, choices: Tuple[str, ...], upper: bool = True) -> str:
    text = str(value).strip()
    text = text.upper() if upper else text.lower()
    if text not in choices:
        raise InvalidArgument(f"{name} must be one of {', '.join(choices)}, got {value!r}")
    return text


# ============================================================
# Skeletons
# ============================================================
@dataclass(slots=True)
class SkeletonGraph:
    num_joints: int
    edges: List[Tuple[int, int]]
    hip_index: int = 0
    joint_names: Optional[List[str]] = None

    @classmethod
    def default(cls) -> 'SkeletonGraph':
        return cls(
            num_joints=int(DEFAULT_SKELETON['num_joints']),
            edges=[tuple(edge) for edge in DEFAULT_SKELETON['edges']],
            hip_index=int(DEFAULT_SKELETON['hip_index']),
            joint_names=list(DEFAULT_SKELETON['joint_names']),
        )

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.num_joints, self.num_joints), dtype=np.float64)
        for a, b in self.edges:
            adj[a, b] = 1.0
            adj[b, a] = 1.0
        return adj

    def to_dict(self) -> Dict[str, Any]:
        return {
            'num_joints': self.num_joints,
            'edges': [[int(a), int(b)] for a, b in self.edges],
            'hip_index': self.hip_index,
        }


@dataclass(slots=True)
class SkeletonSequence:
    """Frames stored as a (T, J, 3) float64 array."""

    frames: np.ndarray
    graph: SkeletonGraph
    label: Optional[str] = None

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def num_joints(self) -> int:
        return int(self.frames.shape[1])

    def with_frames(self, frames: np.ndarray) -> 'SkeletonSequence':
        return SkeletonSequence(frames=np.asarray(frames, dtype=np.float64), graph=self.graph, label=self.label)


@dataclass(slots=True)
class BlockSequence:
    """Temporal blocks as a (tau, 3, J, M) array."""

    blocks: np.ndarray
    block_size: int
    stride: int
    padded_length: int

    @property
    def num_blocks(self) -> int:
        return int(self.blocks.shape[0])

    @property
    def num_joints(self) -> int:
        return int(self.blocks.shape[2])


# ============================================================
# Geometry
# ============================================================
@dataclass(slots=True)
class CameraIntrinsics:
    k: np.ndarray


@dataclass(slots=True)
class CameraPose:
    r: np.ndarray
    t: np.ndarray


@dataclass(slots=True)
class StereoRig:
    intrinsics_l: CameraIntrinsics
    intrinsics_r: CameraIntrinsics
    pose: CameraPose


@dataclass(slots=True)
class ViewGrid:
    eta_az: int = int(APP_CONFIG['ETA_AZ'])
    eta_alt: int = int(APP_CONFIG['ETA_ALT'])
    step_deg: float = float(APP_CONFIG['STEP_DEG'])
    mode: ViewMode = APP_CONFIG['VIEW_MODE']  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.eta_az < 0 or self.eta_alt < 0:
            raise InvalidArgument("view grid half-counts must be >= 0")
        if not self.step_deg > 0:
            raise InvalidArgument("view grid step must be > 0 degrees")
        if self.mode not in VIEW_MODES:
            raise InvalidArgument(f"unknown view mode {self.mode!r}")

    @classmethod
    def single(cls) -> 'ViewGrid':
        """The grid holding only the zero-angle view."""
        return cls(eta_az=0, eta_alt=0)

    @property
    def shape(self) -> Tuple[int, int]:
        return 2 * self.eta_az + 1, 2 * self.eta_alt + 1

    def angles(self) -> List[Tuple[float, float]]:
        """(azimuth, altitude) pairs, row-major by (azimuth index, altitude index)."""
        return [
            ((i - self.eta_az) * self.step_deg, (j - self.eta_alt) * self.step_deg)
            for i in range(2 * self.eta_az + 1)
            for j in range(2 * self.eta_alt + 1)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'ViewGrid':
        return cls(
            eta_az=_as_int(_pick(data, 'eta_az', APP_CONFIG['ETA_AZ']), 'eta_az'),
            eta_alt=_as_int(_pick(data, 'eta_alt', APP_CONFIG['ETA_ALT']), 'eta_alt'),
            step_deg=_as_float(_pick(data, 'step_deg', APP_CONFIG['STEP_DEG']), 'step_deg'),
            mode=_as_choice(_pick(data, 'mode', APP_CONFIG['VIEW_MODE']), 'mode', VIEW_MODES),  # type: ignore[arg-type]
        )


# ============================================================
# Encoder
# ============================================================
@dataclass(slots=True)
class EncoderConfig:
    block_size: int = int(APP_CONFIG['BLOCK_SIZE'])
    stride: int = int(APP_CONFIG['BLOCK_STRIDE'])
    feature_dim: int = int(APP_CONFIG['FEATURE_DIM'])
    output_dim: int = int(APP_CONFIG['OUTPUT_DIM'])
    variant: GnnVariant = 'S2GC'
    layers: int = int(APP_CONFIG['GNN_LAYERS'])
    alpha: float = float(APP_CONFIG['GNN_ALPHA'])
    dropout: float = float(APP_CONFIG['DROPOUT'])
    init_std: float = float(APP_CONFIG['INIT_STD'])
    seed: int = 0

    def __post_init__(self) -> None:
        if self.block_size < 1 or self.stride < 1:
            raise InvalidArgument("block size and stride must be >= 1")
        if self.feature_dim < 1 or self.output_dim < 1:
            raise InvalidArgument("feature dimensions must be >= 1")
        if self.variant not in GNN_VARIANTS:
            raise InvalidArgument(f"unknown GNN variant {self.variant!r}")
        if self.layers < 1:
            raise InvalidArgument("GNN layer count L must be >= 1")
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidArgument("alpha must lie in (0, 1]")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidArgument("dropout must lie in [0, 1)")
        if not self.init_std > 0:
            raise InvalidArgument("init_std must be > 0")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'EncoderConfig':
        base = cls()
        return cls(
            block_size=_as_int(_pick(data, 'block_size', base.block_size), 'block_size'),
            stride=_as_int(_pick(data, 'stride', base.stride), 'stride'),
            feature_dim=_as_int(_pick(data, 'feature_dim', base.feature_dim), 'feature_dim'),
            output_dim=_as_int(_pick(data, 'output_dim', base.output_dim), 'output_dim'),
            variant=_as_choice(_pick(data, 'variant', base.variant), 'variant', GNN_VARIANTS),  # type: ignore[arg-type]
            layers=_as_int(_pick(data, 'layers', base.layers), 'layers'),
            alpha=_as_float(_pick(data, 'alpha', base.alpha), 'alpha'),
            dropout=_as_float(_pick(data, 'dropout', base.dropout), 'dropout'),
            init_std=_as_float(_pick(data, 'init_std', base.init_std), 'init_std'),
            seed=_as_int(_pick(data, 'seed', base.seed), 'seed'),
        )


@dataclass(slots=True)
class EncoderCache:
    """Forward intermediates kept for encoder_backward."""

    output: torch.Tensor
    parameters: Dict[str, torch.Tensor]


@dataclass(slots=True)
class FeatureMap:
    """Encoded features of shape (d', K, K', tau)."""

    data: torch.Tensor
    provenance: Dict[str, Any] = field(default_factory=dict)
    cache: Optional[EncoderCache] = None

    @property
    def view_shape(self) -> Tuple[int, int]:
        return int(self.data.shape[1]), int(self.data.shape[2])

    @property
    def num_blocks(self) -> int:
        return int(self.data.shape[3])

    @property
    def has_views(self) -> bool:
        return self.view_shape != (1, 1)


# ============================================================
# Alignment
# ============================================================
@dataclass(slots=True)
class AlignmentConfig:
    gamma: float = float(APP_CONFIG['GAMMA'])
    iota: int = int(APP_CONFIG['IOTA'])
    iota_alt: Optional[int] = None
    base: BaseDistance = 'EUCLIDEAN'
    sigma: float = float(APP_CONFIG['RBF_SIGMA'])

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise InvalidArgument("gamma must be > 0")
        if self.iota < 1 or (self.iota_alt is not None and self.iota_alt < 1):
            raise InvalidArgument("iota must be >= 1")
        if self.base not in BASE_DISTANCES:
            raise InvalidArgument(f"unknown base distance {self.base!r}")
        if not self.sigma > 0:
            raise InvalidArgument("sigma must be > 0")

    @property
    def iotas(self) -> Tuple[int, int]:
        return self.iota, self.iota if self.iota_alt is None else self.iota_alt

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'AlignmentConfig':
        iota_alt = data.get('iota_alt')
        return cls(
            gamma=_as_float(_pick(data, 'gamma', APP_CONFIG['GAMMA']), 'gamma'),
            iota=_as_int(_pick(data, 'iota', APP_CONFIG['IOTA']), 'iota'),
            iota_alt=None if iota_alt is None else _as_int(iota_alt, 'iota_alt'),
            base=_as_choice(_pick(data, 'base', APP_CONFIG['BASE_DISTANCE']), 'base', BASE_DISTANCES),  # type: ignore[arg-type]
            sigma=_as_float(_pick(data, 'sigma', APP_CONFIG['RBF_SIGMA']), 'sigma'),
        )


@dataclass(slots=True)
class AlignmentCache:
    method: str
    d: np.ndarray
    r: np.ndarray
    gamma: float
    extras: Dict[str, Any] = field(default_factory=dict)


@dataclass(slots=True)
class AlignmentResult:
    value: float
    grad_d: Optional[np.ndarray] = None
    cache: Optional[AlignmentCache] = None


# ============================================================
# Few-shot
# ============================================================
@dataclass(slots=True)
class Episode:
    """One query plus N x Z supports; ``class_ids[0]`` is the query's class."""

    query: SkeletonSequence
    supports: List[List[SkeletonSequence]]
    class_ids: List[str]
    seed: int = 0

    @property
    def n_way(self) -> int:
        return len(self.class_ids)

    @property
    def z_shot(self) -> int:
        return len(self.supports[0]) if self.supports else 0

    @property
    def truth(self) -> str:
        return self.class_ids[0]


@dataclass(slots=True)
class LossConfig:
    beta: int = int(APP_CONFIG['LOSS_BETA'])
    variant: LossVariant = 'MAIN'
    c: float = float(APP_CONFIG['LOSS_C'])

    def __post_init__(self) -> None:
        if self.beta < 1:
            raise InvalidArgument("beta must be >= 1")
        if self.variant not in LOSS_VARIANTS:
            raise InvalidArgument(f"unknown loss variant {self.variant!r}")
        if self.c < 0:
            raise InvalidArgument("loss constant c must be >= 0")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'LossConfig':
        return cls(
            beta=_as_int(_pick(data, 'beta', APP_CONFIG['LOSS_BETA']), 'beta'),
            variant=_as_choice(_pick(data, 'variant', APP_CONFIG['LOSS_VARIANT']), 'variant', LOSS_VARIANTS),  # type: ignore[arg-type]
            c=_as_float(_pick(data, 'c', APP_CONFIG['LOSS_C']), 'c'),
        )


@dataclass(slots=True)
class TrainConfig:
    n_way: int = int(APP_CONFIG['N_WAY'])
    z_shot: int = int(APP_CONFIG['Z_SHOT'])
    batch: int = int(APP_CONFIG['BATCH'])
    episodes: int = int(APP_CONFIG['EPISODES'])
    lr: float = float(APP_CONFIG['LEARNING_RATE'])
    weight_decay: float = float(APP_CONFIG['WEIGHT_DECAY'])
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    fixed_batch: bool = False
    grad_clip: float = float(APP_CONFIG['GRAD_CLIP'])

    def __post_init__(self) -> None:
        if self.n_way < 2 or self.z_shot < 1:
            raise InvalidArgument("episodes need N >= 2 and Z >= 1")
        if self.batch < 1 or self.episodes < 0:
            raise InvalidArgument("batch must be >= 1 and episodes >= 0")
        if self.lr < 0 or self.weight_decay < 0:
            raise InvalidArgument("lr and weight_decay must be >= 0")
        if self.grad_clip < 0:
            raise InvalidArgument("grad_clip must be >= 0 (0 disables clipping)")

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload['loss'] = self.loss.to_dict()
        return payload


@dataclass(slots=True)
class ProtocolConfig:
    n_way: int = int(APP_CONFIG['N_WAY'])
    z_shot: int = int(APP_CONFIG['Z_SHOT'])
    episodes: int = int(APP_CONFIG['EVAL_EPISODES'])
    batch: int = int(APP_CONFIG['BATCH'])
    seed: int = 0
    train_classes: List[str] = field(default_factory=list)
    test_classes: List[str] = field(default_factory=list)
    method: AlignMethod = 'jeanie'
    axes: int = 2
    support_views: bool = False
    lr: float = float(APP_CONFIG['LEARNING_RATE'])
    weight_decay: float = float(APP_CONFIG['WEIGHT_DECAY'])
    grad_clip: float = float(APP_CONFIG['GRAD_CLIP'])
    alignment: AlignmentConfig = field(default_factory=AlignmentConfig)
    grid: ViewGrid = field(default_factory=ViewGrid)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    camera: Optional[str] = None

    def __post_init__(self) -> None:
        if self.n_way < 2 or self.z_shot < 1:
            raise InvalidArgument("protocol needs n_way >= 2 and z_shot >= 1")
        if self.episodes < 0 or self.batch < 1:
            raise InvalidArgument("episodes must be >= 0 and batch >= 1")
        if self.axes not in (1, 2):
            raise InvalidArgument("axes must be 1 or 2")
        if self.method not in ALIGN_METHODS:
            raise InvalidArgument(f"unknown method {self.method!r}")

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            n_way=self.n_way,
            z_shot=self.z_shot,
            batch=self.batch,
            episodes=self.episodes,
            lr=self.lr,
            weight_decay=self.weight_decay,
            seed=self.seed,
            loss=self.loss,
            grad_clip=self.grad_clip,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_way': self.n_way,
            'z_shot': self.z_shot,
            'episodes': self.episodes,
            'batch': self.batch,
            'seed': self.seed,
            'train_classes': list(self.train_classes),
            'test_classes': list(self.test_classes),
            'method': self.method,
            'axes': self.axes,
            'support_views': self.support_views,
            'lr': self.lr,
            'weight_decay': self.weight_decay,
            'grad_clip': self.grad_clip,
            'alignment': self.alignment.to_dict(),
            'grid': self.grid.to_dict(),
            'encoder': self.encoder.to_dict(),
            'loss': self.loss.to_dict(),
            'camera': self.camera,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'ProtocolConfig':
        if not isinstance(data, Mapping):
            raise InvalidArgument("protocol config must be a JSON object")
        for key in ('train_classes', 'test_classes'):
            value = data.get(key, [])
            if not isinstance(value, list):
                raise InvalidArgument(f"{key} must be a list of class ids")
        return cls(
            n_way=_as_int(_pick(data, 'n_way', APP_CONFIG['N_WAY']), 'n_way'),
            z_shot=_as_int(_pick(data, 'z_shot', APP_CONFIG['Z_SHOT']), 'z_shot'),
            episodes=_as_int(_pick(data, 'episodes', APP_CONFIG['EVAL_EPISODES']), 'episodes'),
            batch=_as_int(_pick(data, 'batch', APP_CONFIG['BATCH']), 'batch'),
            seed=_as_int(_pick(data, 'seed', 0), 'seed'),
            train_classes=[str(item) for item in data.get('train_classes', [])],
            test_classes=[str(item) for item in data.get('test_classes', [])],
            method=_as_choice(_pick(data, 'method', 'jeanie'), 'method', ALIGN_METHODS, upper=False),  # type: ignore[arg-type]
            axes=_as_int(_pick(data, 'axes', 2), 'axes'),
            support_views=bool(data.get('support_views', False)),
            lr=_as_float(_pick(data, 'lr', APP_CONFIG['LEARNING_RATE']), 'lr'),
            weight_decay=_as_float(_pick(data, 'weight_decay', APP_CONFIG['WEIGHT_DECAY']), 'weight_decay'),
            grad_clip=_as_float(_pick(data, 'grad_clip', APP_CONFIG['GRAD_CLIP']), 'grad_clip'),
            alignment=AlignmentConfig.from_dict(data.get('alignment') or {}),
            grid=ViewGrid.from_dict(data.get('grid') or {}),
            encoder=EncoderConfig.from_dict(data.get('encoder') or {}),
            loss=LossConfig.from_dict(data.get('loss') or {}),
            camera=data.get('camera'),
        )


@dataclass(slots=True)
class EpisodeOutcome:
    episode_id: int
    predicted: str
    truth: str
    d_pos_mean: float
    d_neg_min: float

    @property
    def correct(self) -> bool:
        return self.predicted == self.truth

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(slots=True)
class EvaluationReport:
    accuracy: float
    stderr: float
    rows: List[EpisodeOutcome]
    confusion: Dict[Tuple[str, str], int]
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def summary(self) -> Dict[str, Any]:
        return {
            'accuracy': self.accuracy,
            'stderr': self.stderr,
            'episodes': len(self.rows),
            'confusion': [
                {'truth': truth, 'predicted': predicted, 'count': count}
                for (truth, predicted), count in sorted(self.confusion.items())
            ],
            **self.diagnostics,
        }


# ============================================================
# CLI
# ============================================================
@dataclass(slots=True)
class RunManifest:
    command: str
    args: Dict[str, Any]
    config: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    out_dir: Optional[str] = None
    version: str = str(APP_CONFIG['VERSION'])

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'args': dict(self.args),
            'config': dict(self.config),
            'seed': self.seed,
            'out_dir': self.out_dir,
            'version': self.version,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'RunManifest':
        if not isinstance(data, Mapping) or not data.get('command'):
            raise InvalidArgument("manifest must be an object with a command")
        return cls(
            command=str(data['command']),
            args=dict(data.get('args') or {}),
            config=dict(data.get('config') or {}),
            seed=_as_int(_pick(data, 'seed', 0), 'seed'),
            out_dir=data.get('out_dir'),
            version=str(data.get('version') or APP_CONFIG['VERSION']),
        )


__all__ = [
    "ALIGN_METHODS",
    "AlignMethod",
    "AlignmentCache",
    "AlignmentConfig",
    "AlignmentResult",
    "BASE_DISTANCES",
    "BaseDistance",
    "BlockSequence",
    "CameraIntrinsics",
    "CameraPose",
    "EncoderCache",
    "EncoderConfig",
    "Episode",
    "EpisodeOutcome",
    "EvaluationReport",
    "FeatureMap",
    "GNN_VARIANTS",
    "GnnVariant",
    "LOSS_VARIANTS",
    "LossConfig",
    "LossVariant",
    "ProtocolConfig",
    "RunManifest",
    "SkeletonGraph",
    "SkeletonSequence",
    "StereoRig",
    "TrainConfig",
    "VIEW_MODES",
    "ViewGrid",
    "ViewMode",
]
