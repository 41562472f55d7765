from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

import numpy as np

from jeanie.core.geometry import check_rotation
from jeanie.data.models import CameraIntrinsics, CameraPose, StereoRig
from jeanie.data.store_utils import read_json
from jeanie.errors import InvalidArgument


def _matrix(doc: Mapping[str, Any], key: str, shape: tuple) -> np.ndarray:
    if key not in doc:
        raise InvalidArgument(f"camera document is missing {key!r}")
    try:
        value = np.asarray(doc[key], dtype=np.float64)
    except (TypeError, ValueError):
        raise InvalidArgument(f"camera field {key!r} is not numeric") from None
    if value.shape != shape or not np.all(np.isfinite(value)):
        raise InvalidArgument(f"camera field {key!r} must be a finite array of shape {shape}")
    return value


def _intrinsics(doc: Mapping[str, Any], key: str) -> CameraIntrinsics:
    k = _matrix(doc, key, (3, 3))
    if abs(k[2, 2] - 1.0) > 1e-12 or np.any(np.tril(k, -1)):
        raise InvalidArgument(f"{key} must be upper-triangular with k[2][2] = 1")
    if abs(np.linalg.det(k)) < 1e-12:
        raise InvalidArgument(f"{key} is not invertible")
    return CameraIntrinsics(k=k)


def parse_camera(doc: Any) -> StereoRig:
    if not isinstance(doc, Mapping):
        raise InvalidArgument("camera document must be a JSON object")
    rotation = _matrix(doc, 'rotation', (3, 3))
    error = check_rotation(rotation, tol=1e-9)
    if error:
        raise InvalidArgument(f"camera {error}")
    return StereoRig(
        intrinsics_l=_intrinsics(doc, 'intrinsics_l'),
        intrinsics_r=_intrinsics(doc, 'intrinsics_r'),
        pose=CameraPose(r=rotation, t=_matrix(doc, 'translation', (3,))),
    )


def load_camera(path: Path) -> StereoRig:
    return parse_camera(read_json(path, 'camera'))


def camera_to_dict(rig: StereoRig) -> dict:
    return {
        'intrinsics_l': rig.intrinsics_l.k.tolist(),
        'intrinsics_r': rig.intrinsics_r.k.tolist(),
        'rotation': np.asarray(rig.pose.r).tolist(),
        'translation': np.asarray(rig.pose.t).tolist(),
    }


__all__ = ["camera_to_dict", "load_camera", "parse_camera"]
