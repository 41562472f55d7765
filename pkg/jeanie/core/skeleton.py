from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from jeanie.data.models import BlockSequence, SkeletonGraph, SkeletonSequence
from jeanie.errors import DegenerateInput, InvalidArgument, StructuralError


# ============================================================
# Graph validation
# ============================================================
def graph_error(graph: SkeletonGraph) -> Optional[str]:
    """Return a description of the first graph problem, or None."""
    if graph.num_joints < 1:
        return "num_joints must be >= 1"
    if not 0 <= graph.hip_index < graph.num_joints:
        return f"hip_index {graph.hip_index} outside [0, {graph.num_joints})"
    for a, b in graph.edges:
        if not (0 <= a < graph.num_joints and 0 <= b < graph.num_joints):
            return f"edge ({a}, {b}) outside [0, {graph.num_joints})"
        if a == b:
            return f"self-loop on joint {a}"
    return None


def is_connected(graph: SkeletonGraph) -> bool:
    if graph.num_joints == 1:
        return True
    count, _ = connected_components(csr_matrix(graph.adjacency()), directed=False)
    return count == 1


def validate_sequence(seq: SkeletonSequence) -> None:
    error = graph_error(seq.graph)
    if error:
        raise StructuralError(error)
    frames = np.asarray(seq.frames)
    if frames.ndim != 3 or frames.shape[2] != 3 or frames.shape[0] < 1:
        raise StructuralError(f"frames must have shape (T, J, 3), got {frames.shape}")
    if frames.shape[1] != seq.graph.num_joints:
        raise StructuralError(f"frames carry {frames.shape[1]} joints, graph has {seq.graph.num_joints}")
    if not np.all(np.isfinite(frames)):
        raise StructuralError("frames contain non-finite coordinates")


# ============================================================
# Preprocessing
# ============================================================
def normalize_sequence(seq: SkeletonSequence) -> SkeletonSequence:
    """Torso-centre every frame, then scale each axis by its global max |value|."""
    validate_sequence(seq)
    hip = seq.graph.hip_index
    frames = np.asarray(seq.frames, dtype=np.float64)
    centered = frames - frames[:, hip:hip + 1, :]
    scale = np.max(np.abs(centered), axis=(0, 1))
    if not np.any(scale > 0):
        raise DegenerateInput("sequence collapses to the torso joint after centering")
    # an axis that is identically zero stays zero
    scale = np.where(scale > 0, scale, 1.0)
    return seq.with_frames(centered / scale)


def block_count(num_frames: int, block_size: int, stride: int) -> int:
    return max(1, (num_frames - block_size) // stride + 1)


def split_blocks(seq: SkeletonSequence, block_size: int, stride: int) -> BlockSequence:
    if block_size < 1 or stride < 1:
        raise InvalidArgument(f"block size and stride must be >= 1, got M={block_size}, S={stride}")
    frames = np.asarray(seq.frames, dtype=np.float64)
    if frames.shape[0] < 1:
        raise InvalidArgument("cannot split an empty sequence")

    if frames.shape[0] < block_size:
        pad = np.repeat(frames[-1:], block_size - frames.shape[0], axis=0)
        frames = np.concatenate([frames, pad], axis=0)

    tau = block_count(frames.shape[0], block_size, stride)
    starts = np.arange(tau) * stride
    # (tau, M, J, 3) -> (tau, 3, J, M)
    windows = np.stack([frames[start:start + block_size] for start in starts])
    blocks = np.ascontiguousarray(windows.transpose(0, 3, 2, 1))
    return BlockSequence(blocks=blocks, block_size=block_size, stride=stride, padded_length=int(frames.shape[0]))


def merge_blocks(blocks: BlockSequence) -> np.ndarray:
    """Concatenate blocks dropping the overlapped frames; returns (T, J, 3)."""
    frames = blocks.blocks.transpose(0, 3, 2, 1)
    keep = min(blocks.stride, blocks.block_size)
    parts = [frames[b, :keep] for b in range(blocks.num_blocks - 1)]
    parts.append(frames[-1])
    return np.concatenate(parts, axis=0)


__all__ = [
    "block_count",
    "graph_error",
    "is_connected",
    "merge_blocks",
    "normalize_sequence",
    "split_blocks",
    "validate_sequence",
]
