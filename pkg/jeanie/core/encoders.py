from __future__ import annotations

from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn

from jeanie.config import APP_CONFIG
from jeanie.core.skeleton import graph_error, is_connected
from jeanie.data.models import BlockSequence, EncoderCache, EncoderConfig, FeatureMap, SkeletonGraph
from jeanie.errors import InvalidArgument, InvalidState

DTYPE = torch.float64


# ============================================================
# Graph operators
# ============================================================
def normalized_adjacency(graph: SkeletonGraph) -> np.ndarray:
    """S = D^-1/2 (A + I) D^-1/2 for a connected joint graph."""
    error = graph_error(graph)
    if error:
        raise InvalidArgument(error)
    if not is_connected(graph):
        raise InvalidArgument("skeleton graph must be connected")
    a_tilde = graph.adjacency() + np.eye(graph.num_joints)
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return inv_sqrt[:, None] * a_tilde * inv_sqrt[None, :]


def gnn_forward(
    h: torch.Tensor,
    adjacency: torch.Tensor,
    config: EncoderConfig,
    theta: Optional[Sequence[torch.Tensor]] = None,
) -> torch.Tensor:
    """Propagate (..., J, d) joint features over the skeleton graph."""
    layers = int(config.layers)
    if layers < 1:
        raise InvalidArgument("GNN layer count L must be >= 1")
    alpha = float(config.alpha)
    s = adjacency.to(h.dtype)

    if config.variant == 'GCN':
        if theta is None or len(theta) != layers:
            raise InvalidArgument(f"GCN needs {layers} weight matrices")
        out = h
        for weight in theta[:-1]:
            out = torch.relu(s @ out @ weight)
        return s @ out @ theta[-1]

    if config.variant == 'SGC':
        out = h
        for _ in range(layers):
            out = s @ out
        return out

    if config.variant == 'APPNP':
        out = h
        for _ in range(layers):
            out = (1.0 - alpha) * (s @ out) + alpha * h
        return (1.0 - alpha) * (s @ out) + alpha * h

    if config.variant == 'S2GC':
        power = h
        total = torch.zeros_like(h)
        for _ in range(layers):
            power = s @ power
            total = total + (1.0 - alpha) * power + alpha * h
        return total / layers

    raise InvalidArgument(f"unknown GNN variant {config.variant!r}")


# ============================================================
# Encoding network
# ============================================================
class EncodingNetwork(nn.Module):
    """Per-block MLP, graph propagation and FC head producing d'-dim block features."""

    def __init__(self, config: EncoderConfig, graph: Optional[SkeletonGraph] = None):
        super().__init__()
        self.config = config
        self.graph = graph or SkeletonGraph.default()
        m = config.block_size
        d = config.feature_dim
        eps = float(APP_CONFIG['LAYER_NORM_EPS'])
        self.mlp = nn.Sequential(
            nn.Linear(3 * m, 6 * m),
            nn.LayerNorm(6 * m, eps=eps),
            nn.ReLU(),
            nn.Linear(6 * m, 9 * m),
            nn.LayerNorm(9 * m, eps=eps),
            nn.ReLU(),
            nn.Dropout(config.dropout),
            nn.Linear(9 * m, d),
            nn.LayerNorm(d, eps=eps),
        )
        self.register_buffer('adjacency', torch.from_numpy(normalized_adjacency(self.graph)))
        theta_count = config.layers if config.variant == 'GCN' else 0
        self.theta = nn.ParameterList([nn.Parameter(torch.empty(d, d)) for _ in range(theta_count)])
        self.head = nn.Linear(d * self.graph.num_joints, config.output_dim)
        self.to(DTYPE)
        self.reset_parameters(config.seed)

    @property
    def num_joints(self) -> int:
        return self.graph.num_joints

    def reset_parameters(self, seed: int) -> None:
        generator = torch.Generator().manual_seed(int(seed))
        std = float(self.config.init_std)
        with torch.no_grad():
            for module in self.modules():
                if isinstance(module, nn.Linear):
                    module.weight.copy_(torch.randn(module.weight.shape, generator=generator, dtype=DTYPE) * std)
                    if module.bias is not None:
                        module.bias.zero_()
                elif isinstance(module, nn.LayerNorm):
                    module.weight.fill_(1.0)
                    module.bias.zero_()
            for weight in self.theta:
                weight.copy_(torch.randn(weight.shape, generator=generator, dtype=DTYPE) * std)

    def encode_joints(self, blocks: torch.Tensor) -> torch.Tensor:
        """(nb, 3, J, M) -> (nb, J, d)."""
        nb, _, joints, m = blocks.shape
        x = blocks.permute(0, 2, 1, 3).reshape(nb, joints, 3 * m)
        return self.mlp(x)

    def forward(self, blocks: torch.Tensor) -> torch.Tensor:
        h = self.encode_joints(blocks)
        h = gnn_forward(h, self.adjacency, self.config, list(self.theta) or None)
        return self.head(h.reshape(h.shape[0], -1))


def _check_block_shape(shape: Tuple[int, ...], encoder: EncodingNetwork) -> Optional[str]:
    expected = (3, encoder.num_joints, encoder.config.block_size)
    if tuple(shape[-3:]) != expected:
        return f"block shape {tuple(shape[-3:])} does not match (3, J, M) = {expected}"
    return None


def mlp_block_encode(block: torch.Tensor | np.ndarray, encoder: EncodingNetwork, train_mode: bool = False) -> torch.Tensor:
    """Encode one (3, J, M) block into a (J, d) joint feature matrix."""
    tensor = torch.as_tensor(block, dtype=DTYPE)
    if tensor.dim() != 3:
        raise InvalidArgument(f"expected a single (3, J, M) block, got {tuple(tensor.shape)}")
    error = _check_block_shape(tuple(tensor.shape), encoder)
    if error:
        raise InvalidArgument(error)
    encoder.train(train_mode)
    with torch.set_grad_enabled(train_mode):
        return encoder.encode_joints(tensor.unsqueeze(0))[0]


def encode_feature_map(
    views: Sequence[BlockSequence],
    encoder: EncodingNetwork,
    train_mode: bool = False,
    grid_shape: Optional[Tuple[int, int]] = None,
) -> FeatureMap:
    """Encode K x K' views (row-major) into a (d', K, K', tau) feature map."""
    if not views:
        raise InvalidArgument("at least one view is required")
    shape = grid_shape or (len(views), 1)
    if shape[0] * shape[1] != len(views):
        raise InvalidArgument(f"grid shape {shape} does not hold {len(views)} views")
    first = views[0].blocks.shape
    for view in views:
        if view.blocks.shape != first:
            raise InvalidArgument(f"inconsistent view shapes {view.blocks.shape} vs {first}")
    error = _check_block_shape(tuple(first), encoder)
    if error:
        raise InvalidArgument(error)

    tau = int(first[0])
    stacked = torch.from_numpy(np.concatenate([view.blocks for view in views], axis=0)).to(DTYPE)
    encoder.train(train_mode)
    with torch.set_grad_enabled(train_mode):
        out = encoder(stacked)
        data = out.reshape(shape[0], shape[1], tau, -1).permute(3, 0, 1, 2)

    cache = None
    if train_mode:
        cache = EncoderCache(output=data, parameters=dict(encoder.named_parameters()))
    provenance = {'grid_shape': tuple(shape), 'blocks': tau, 'train_mode': train_mode}
    return FeatureMap(data=data, provenance=provenance, cache=cache)


def encoder_backward(upstream: torch.Tensor | np.ndarray, feature: FeatureMap) -> Dict[str, torch.Tensor]:
    """Reverse-mode gradients of <upstream, feature.data> over the encoder parameters."""
    cache = feature.cache
    if cache is None or not cache.output.requires_grad:
        raise InvalidState("feature map has no training-mode forward cache")
    grad_out = torch.as_tensor(upstream, dtype=cache.output.dtype)
    if grad_out.shape != cache.output.shape:
        raise InvalidArgument(f"upstream shape {tuple(grad_out.shape)} != feature shape {tuple(cache.output.shape)}")
    names = list(cache.parameters)
    params = [cache.parameters[name] for name in names]
    grads = torch.autograd.grad(cache.output, params, grad_outputs=grad_out, retain_graph=True, allow_unused=True)
    return {
        name: (grad if grad is not None else torch.zeros_like(param))
        for name, param, grad in zip(names, params, grads)
    }


__all__ = [
    "DTYPE",
    "EncodingNetwork",
    "encode_feature_map",
    "encoder_backward",
    "gnn_forward",
    "mlp_block_encode",
    "normalized_adjacency",
]
