from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, List, Tuple, Union

import numpy as np

from jeanie.config import APP_CONFIG
from jeanie.data.models import SkeletonGraph, SkeletonSequence
from jeanie.core.skeleton import validate_sequence
from jeanie.errors import DataFileError, SkelJsonError, StructuralError
from jeanie.logging import logger


# ============================================================
# SKEL-JSON 파싱
# ============================================================
def _require_int(value: Any, field: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SkelJsonError(field, f"expected an integer, got {value!r}")
    if value < minimum:
        raise SkelJsonError(field, f"must be >= {minimum}, got {value}")
    return value


def _parse_edges(raw: Any, num_joints: int) -> List[Tuple[int, int]]:
    if not isinstance(raw, list):
        raise SkelJsonError('edges', "expected a list of [a, b] pairs")
    edges: List[Tuple[int, int]] = []
    for index, item in enumerate(raw):
        field = f'edges[{index}]'
        if not isinstance(item, list) or len(item) != 2:
            raise SkelJsonError(field, "expected an [a, b] pair")
        a = _require_int(item[0], field)
        b = _require_int(item[1], field)
        if a >= num_joints or b >= num_joints:
            raise SkelJsonError(field, f"joint index outside [0, {num_joints})")
        if a == b:
            raise SkelJsonError(field, "self-loops are not allowed")
        edges.append((a, b))
    return edges


def _parse_frames(raw: Any, num_joints: int) -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        raise SkelJsonError('frames', "expected a non-empty list of frames")
    frames = np.empty((len(raw), num_joints, 3), dtype=np.float64)
    for f, frame in enumerate(raw):
        if not isinstance(frame, list):
            raise SkelJsonError(f'frames[{f}]', "expected a list of joints")
        if len(frame) != num_joints:
            raise StructuralError(f"frame {f} has {len(frame)} joints, expected {num_joints}")
        for j, joint in enumerate(frame):
            field = f'frames[{f}][{j}]'
            if not isinstance(joint, list) or len(joint) != 3:
                raise SkelJsonError(field, "expected [x, y, z]")
            for axis, value in enumerate(joint):
                if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                    raise SkelJsonError(field, f"coordinate {axis} is not a finite number")
                frames[f, j, axis] = float(value)
    return frames


def parse_skel_json(text: Union[bytes, str]) -> SkeletonSequence:
    try:
        doc = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SkelJsonError('$', f"not valid UTF-8 JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SkelJsonError('$', "top level must be an object")

    for key in ('num_joints', 'edges', 'hip_index', 'frames'):
        if key not in doc:
            raise SkelJsonError(key, "missing required field")
    num_joints = _require_int(doc['num_joints'], 'num_joints', minimum=1)
    hip_index = _require_int(doc['hip_index'], 'hip_index')
    if hip_index >= num_joints:
        raise SkelJsonError('hip_index', f"outside [0, {num_joints})")
    label = doc.get('label')
    if label is not None and not isinstance(label, str):
        raise SkelJsonError('label', "expected a string or null")

    graph = SkeletonGraph(num_joints=num_joints, edges=_parse_edges(doc['edges'], num_joints), hip_index=hip_index)
    return SkeletonSequence(frames=_parse_frames(doc['frames'], num_joints), graph=graph, label=label)


def write_skel_json(seq: SkeletonSequence) -> bytes:
    payload = {
        'num_joints': seq.graph.num_joints,
        'edges': [[int(a), int(b)] for a, b in seq.graph.edges],
        'hip_index': seq.graph.hip_index,
        'label': seq.label,
        'frames': np.asarray(seq.frames, dtype=np.float64).tolist(),
    }
    return json.dumps(payload, ensure_ascii=False).encode('utf-8')


# ============================================================
# Files
# ============================================================
def load_skel_file(path: Path) -> SkeletonSequence:
    with open(path, 'rb') as file:
        return parse_skel_json(file.read())


def save_skel_file(path: Path, seq: SkeletonSequence) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(write_skel_json(seq))


def load_corpus(directory: Path) -> List[SkeletonSequence]:
    suffix = str(APP_CONFIG['SKEL_SUFFIX'])
    files = sorted(p for p in Path(directory).iterdir() if p.name.endswith(suffix))
    if not files:
        raise FileNotFoundError(f"no *{suffix} files in {directory}")
    sequences: List[SkeletonSequence] = []
    for path in files:
        try:
            seq = load_skel_file(path)
            validate_sequence(seq)
        except (SkelJsonError, StructuralError, OSError) as exc:
            raise DataFileError(str(path), exc) from exc
        sequences.append(seq)
    logger.info("Loaded %s sequences from %s", len(sequences), directory)
    return sequences


__all__ = ["load_corpus", "load_skel_file", "parse_skel_json", "save_skel_file", "write_skel_json"]
