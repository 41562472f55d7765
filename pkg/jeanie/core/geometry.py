from __future__ import annotations

from typing import List, Optional

import numpy as np
from scipy.spatial.transform import Rotation

from jeanie.config import APP_CONFIG
from jeanie.data.models import CameraIntrinsics, CameraPose, SkeletonSequence, ViewGrid
from jeanie.errors import DegenerateGeometry, InvalidArgument, MissingParameter

_AXES = ('x', 'y', 'z')


# ============================================================
# Rotations
# ============================================================
def euler_rotation(theta_x: float, theta_y: float, theta_z: float, order: str = 'xyz') -> np.ndarray:
    """Compose the per-axis rotations, applying them in ``order`` (first letter first).

    Per-axis matrices follow the row-vector-style convention
    R_x = [[1, 0, 0], [0, c, s], [0, -s, c]], so (90, 0, 0) sends (0, 1, 0) to (0, 0, -1).
    """
    angles = {'x': theta_x, 'y': theta_y, 'z': theta_z}
    if not all(np.isfinite(float(value)) for value in angles.values()):
        raise InvalidArgument(f"rotation angles must be finite, got {theta_x}, {theta_y}, {theta_z}")
    seq = str(order).lower()
    if sorted(seq) != list(_AXES):
        raise InvalidArgument(f"order must be a permutation of 'xyz', got {order!r}")

    # scipy's active matrices are the transposes of ours, hence the negated angles;
    # lowercase means extrinsic, i.e. the first axis is applied first
    rotation = Rotation.from_euler(seq, [-float(angles[axis]) for axis in seq], degrees=True)
    return rotation.as_matrix()


def check_rotation(m: np.ndarray, tol: float = 1e-12) -> Optional[str]:
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return "rotation must be a finite 3x3 matrix"
    if np.linalg.norm(m.T @ m - np.eye(3)) > tol:
        return "rotation is not orthonormal"
    if abs(np.linalg.det(m) - 1.0) > tol:
        return "rotation determinant is not 1"
    return None


# ============================================================
# Stereo geometry
# ============================================================
def skew_matrix(t: np.ndarray) -> np.ndarray:
    tx, ty, tz = (float(value) for value in np.asarray(t, dtype=np.float64).reshape(3))
    return np.array([
        [0.0, -tz, ty],
        [tz, 0.0, -tx],
        [-ty, tx, 0.0],
    ])


def _check_intrinsics(intr: CameraIntrinsics, side: str) -> np.ndarray:
    k = np.asarray(intr.k, dtype=np.float64)
    if k.shape != (3, 3) or not np.all(np.isfinite(k)):
        raise InvalidArgument(f"{side} intrinsics must be a finite 3x3 matrix")
    if abs(np.linalg.det(k)) < 1e-12:
        raise InvalidArgument(f"{side} intrinsics are not invertible")
    return k


def essential_matrix(pose: CameraPose) -> np.ndarray:
    t = np.asarray(pose.t, dtype=np.float64).reshape(3)
    if not np.any(t):
        raise DegenerateGeometry("zero translation gives a vanishing essential matrix")
    return np.asarray(pose.r, dtype=np.float64) @ skew_matrix(t)


def fundamental_matrix(intr_l: CameraIntrinsics, intr_r: CameraIntrinsics, pose: CameraPose) -> np.ndarray:
    """F = (M_r^-1)^T E M_l^-1 with E = R S(t)."""
    k_l = _check_intrinsics(intr_l, 'left')
    k_r = _check_intrinsics(intr_r, 'right')
    error = check_rotation(pose.r, tol=1e-9)
    if error:
        raise InvalidArgument(error)
    e = essential_matrix(pose)
    return np.linalg.inv(k_r).T @ e @ np.linalg.inv(k_l)


def project_points(points: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Pinhole projection of (N, 3) camera-frame points to homogeneous pixels (N, 3)."""
    pts = np.asarray(points, dtype=np.float64)
    pix = pts @ np.asarray(intr.k, dtype=np.float64).T
    return pix / pix[:, 2:3]


def epipolar_residual(f: np.ndarray, p_l: np.ndarray, p_r: np.ndarray) -> np.ndarray:
    """|p_r^T F p_l| per correspondence, F scaled to unit Frobenius norm."""
    f_unit = np.asarray(f, dtype=np.float64) / np.linalg.norm(f)
    return np.abs(np.einsum('ni,ij,nj->n', np.asarray(p_r), f_unit, np.asarray(p_l)))


# ============================================================
# View simulation
# ============================================================
def hip_center(seq: SkeletonSequence) -> np.ndarray:
    frames = np.asarray(seq.frames, dtype=np.float64)
    return frames - frames[:, seq.graph.hip_index:seq.graph.hip_index + 1, :]


def view_rotation(azimuth: float, altitude: float) -> np.ndarray:
    return euler_rotation(altitude, azimuth, 0.0, APP_CONFIG['EULER_ORDER'])


def simulate_view(
    seq: SkeletonSequence,
    azimuth: float,
    altitude: float,
    mode: str = 'EULER',
    camera: Optional[CameraPose] = None,
) -> SkeletonSequence:
    rotation = view_rotation(azimuth, altitude)
    if mode == 'EULER':
        return seq.with_frames(hip_center(seq) @ rotation.T)
    if mode == 'CAMVPC':
        if camera is None:
            raise MissingParameter("CAMVPC view simulation needs a camera pose")
        r_view = rotation @ np.asarray(camera.r, dtype=np.float64)
        t = np.asarray(camera.t, dtype=np.float64).reshape(1, 1, 3)
        return seq.with_frames((np.asarray(seq.frames, dtype=np.float64) - t) @ r_view.T)
    raise InvalidArgument(f"unknown view mode {mode!r}")


def camvpc_inverse(seq: SkeletonSequence, azimuth: float, altitude: float, camera: CameraPose) -> SkeletonSequence:
    """Map simulated camera-frame joints back to the world frame."""
    r_view = view_rotation(azimuth, altitude) @ np.asarray(camera.r, dtype=np.float64)
    t = np.asarray(camera.t, dtype=np.float64).reshape(1, 1, 3)
    return seq.with_frames(np.asarray(seq.frames) @ r_view + t)


def generate_view_grid(
    seq: SkeletonSequence,
    grid: ViewGrid,
    camera: Optional[CameraPose] = None,
) -> List[SkeletonSequence]:
    return [
        simulate_view(seq, azimuth, altitude, grid.mode, camera)
        for azimuth, altitude in grid.angles()
    ]


__all__ = [
    "camvpc_inverse",
    "check_rotation",
    "epipolar_residual",
    "essential_matrix",
    "euler_rotation",
    "fundamental_matrix",
    "generate_view_grid",
    "hip_center",
    "project_points",
    "simulate_view",
    "skew_matrix",
    "view_rotation",
]
