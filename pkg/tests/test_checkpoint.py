from __future__ import annotations

import json
from pathlib import Path

import pytest
import torch

from jeanie.core.encoders import EncodingNetwork
from jeanie.data.checkpoint import checkpoint_payload, encoder_from_payload, load_checkpoint, save_checkpoint
from jeanie.data.models import EncoderConfig, SkeletonGraph
from jeanie.errors import StructuralError

SMALL = EncoderConfig(block_size=4, stride=4, feature_dim=6, output_dim=5, layers=2, variant='GCN', seed=8)


def test_checkpoint_round_trip(tmp_path: Path):
    encoder = EncodingNetwork(SMALL)
    path = tmp_path / 'run' / 'checkpoint.json'
    assert save_checkpoint(path, encoder, {'steps': 3})

    loaded = load_checkpoint(path)
    assert loaded.config == encoder.config
    assert loaded.graph.edges == encoder.graph.edges
    assert not loaded.training
    for name, tensor in encoder.state_dict().items():
        torch.testing.assert_close(loaded.state_dict()[name], tensor, rtol=0.0, atol=0.0)

    doc = json.loads(path.read_text(encoding='utf-8'))
    assert doc['extra'] == {'steps': 3}
    assert doc['seed'] == 8


def test_custom_graph_survives_round_trip():
    graph = SkeletonGraph(num_joints=3, edges=[(0, 1), (1, 2)], hip_index=1)
    encoder = EncodingNetwork(SMALL, graph)
    loaded = encoder_from_payload(json.loads(json.dumps(checkpoint_payload(encoder))))
    assert loaded.num_joints == 3
    assert loaded.graph.hip_index == 1


def test_wrong_magic_is_rejected():
    payload = checkpoint_payload(EncodingNetwork(SMALL))
    payload['magic'] = 'SOMETHING-ELSE'
    with pytest.raises(StructuralError):
        encoder_from_payload(payload)
    with pytest.raises(StructuralError):
        encoder_from_payload([1, 2, 3])


@pytest.mark.parametrize('mutate', [
    lambda doc: doc.pop('arrays'),
    lambda doc: doc['arrays'].pop('head.weight'),
    lambda doc: doc['arrays']['head.bias'].update(shape=[99]),
    lambda doc: doc['graph'].update(edges='nope'),
])
def test_malformed_payload_is_structural_error(mutate):
    payload = json.loads(json.dumps(checkpoint_payload(EncodingNetwork(SMALL))))
    mutate(payload)
    with pytest.raises(StructuralError):
        encoder_from_payload(payload)


def test_missing_and_corrupt_files(tmp_path: Path):
    with pytest.raises(OSError):
        load_checkpoint(tmp_path / 'absent.json')
    broken = tmp_path / 'broken.json'
    broken.write_text('{"magic": ', encoding='utf-8')
    with pytest.raises(StructuralError):
        load_checkpoint(broken)
