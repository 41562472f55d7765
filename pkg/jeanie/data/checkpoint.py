from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import numpy as np
import torch

from jeanie.config import APP_CONFIG
from jeanie.core.encoders import DTYPE, EncodingNetwork
from jeanie.data.models import EncoderConfig, SkeletonGraph
from jeanie.data.store_utils import read_json, save_json_atomic
from jeanie.errors import StructuralError


def checkpoint_payload(encoder: EncodingNetwork, extra: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    arrays = {
        name: {'shape': list(tensor.shape), 'data': tensor.detach().cpu().reshape(-1).tolist()}
        for name, tensor in encoder.state_dict().items()
    }
    return {
        'magic': APP_CONFIG['CHECKPOINT_MAGIC'],
        'version': APP_CONFIG['VERSION'],
        'seed': encoder.config.seed,
        'encoder': encoder.config.to_dict(),
        'graph': encoder.graph.to_dict(),
        'arrays': arrays,
        'extra': dict(extra or {}),
    }


def save_checkpoint(path: Path, encoder: EncodingNetwork, extra: Optional[Mapping[str, Any]] = None) -> bool:
    return save_json_atomic(path, checkpoint_payload(encoder, extra), 'checkpoint', indent=None)


def encoder_from_payload(doc: Any) -> EncodingNetwork:
    if not isinstance(doc, Mapping) or doc.get('magic') != APP_CONFIG['CHECKPOINT_MAGIC']:
        raise StructuralError(f"not a {APP_CONFIG['CHECKPOINT_MAGIC']} checkpoint")
    try:
        graph_doc = doc['graph']
        graph = SkeletonGraph(
            num_joints=int(graph_doc['num_joints']),
            edges=[(int(a), int(b)) for a, b in graph_doc['edges']],
            hip_index=int(graph_doc['hip_index']),
        )
        encoder = EncodingNetwork(EncoderConfig.from_dict(doc['encoder']), graph)
        state = {}
        for name, entry in doc['arrays'].items():
            data = np.asarray(entry['data'], dtype=np.float64).reshape(entry['shape'])
            state[name] = torch.from_numpy(data).to(DTYPE)
        encoder.load_state_dict(state, strict=True)
    except (KeyError, TypeError, ValueError, RuntimeError) as exc:
        raise StructuralError(f"malformed checkpoint: {exc}") from exc
    encoder.eval()
    return encoder


def load_checkpoint(path: Path) -> EncodingNetwork:
    return encoder_from_payload(read_json(path, 'checkpoint'))


__all__ = ["checkpoint_payload", "encoder_from_payload", "load_checkpoint", "save_checkpoint"]
