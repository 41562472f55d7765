"""Procedural single-subject actions on the default 15-joint skeleton."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple, Union

import numpy as np

from jeanie.core.geometry import euler_rotation
from jeanie.data.models import SkeletonGraph, SkeletonSequence
from jeanie.errors import InvalidArgument

Angles = Dict[str, Union[Tuple[np.ndarray, np.ndarray], np.ndarray]]

# segment lengths in metres
_NECK = 0.5
_HEAD = 0.2
_SHOULDER = 0.18
_HIP = 0.1
_UPPER_ARM = 0.28
_FOREARM = 0.25
_THIGH = 0.4
_SHIN = 0.4


@dataclass(frozen=True, slots=True)
class MotionPattern:
    name: str
    cycles: float
    pose: Callable[[np.ndarray, float], Angles]


def _rise(p: np.ndarray) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(p)


def _const(p: np.ndarray, value: float) -> np.ndarray:
    return np.full_like(p, float(value))


# ============================================================
# Motion catalog
# ============================================================
def _wave(side: str) -> Callable[[np.ndarray, float], Angles]:
    def pose(p: np.ndarray, a: float) -> Angles:
        return {
            f'{side}_arm': (_const(p, 150.0), _const(p, 0.0)),
            f'{side}_fore': (150.0 + 35.0 * a * np.sin(p), _const(p, 0.0)),
        }
    return pose


def _punch_right(p: np.ndarray, a: float) -> Angles:
    e = a * _rise(p)
    return {
        'r_arm': (_const(p, 15.0), 20.0 + 70.0 * e),
        'r_fore': (_const(p, 15.0), 20.0 + 75.0 * e),
        'l_arm': (_const(p, 10.0), _const(p, 30.0)),
        'l_fore': (_const(p, 10.0), _const(p, 110.0)),
    }


def _kick_right(p: np.ndarray, a: float) -> Angles:
    e = a * _rise(p)
    return {
        'r_thigh': (_const(p, 0.0), 75.0 * e),
        'r_shin': (_const(p, 0.0), 60.0 * e),
        'l_arm': (_const(p, 20.0), _const(p, 0.0)),
        'r_arm': (_const(p, 20.0), _const(p, 0.0)),
    }


def _squat(p: np.ndarray, a: float) -> Angles:
    e = a * _rise(p)
    angles: Angles = {'lean': 20.0 * e}
    for side in ('l', 'r'):
        angles[f'{side}_thigh'] = (_const(p, 0.0), 80.0 * e)
        angles[f'{side}_shin'] = (_const(p, 0.0), -30.0 * e)
        angles[f'{side}_arm'] = (_const(p, 0.0), 85.0 * e)
        angles[f'{side}_fore'] = (_const(p, 0.0), 85.0 * e)
    return angles


def _jumping_jacks(p: np.ndarray, a: float) -> Angles:
    e = a * _rise(p)
    angles: Angles = {}
    for side in ('l', 'r'):
        angles[f'{side}_arm'] = (20.0 + 140.0 * e, _const(p, 0.0))
        angles[f'{side}_fore'] = (20.0 + 140.0 * e, _const(p, 0.0))
        angles[f'{side}_thigh'] = (15.0 * e, _const(p, 0.0))
        angles[f'{side}_shin'] = (15.0 * e, _const(p, 0.0))
    return angles


def _clap(p: np.ndarray, a: float) -> Angles:
    spread = 1.0 - _rise(p)
    angles: Angles = {}
    for side in ('l', 'r'):
        angles[f'{side}_arm'] = (5.0 + 35.0 * a * spread, _const(p, 80.0))
        angles[f'{side}_fore'] = (-20.0 + 35.0 * a * spread, _const(p, 85.0))
    return angles


def _bow(p: np.ndarray, a: float) -> Angles:
    return {'lean': 50.0 * a * _rise(p)}


def _raise_both_arms(p: np.ndarray, a: float) -> Angles:
    e = a * _rise(p)
    return {
        'l_arm': (_const(p, 0.0), 170.0 * e),
        'l_fore': (_const(p, 0.0), 170.0 * e),
        'r_arm': (_const(p, 0.0), 170.0 * e),
        'r_fore': (_const(p, 0.0), 170.0 * e),
    }


def _march(p: np.ndarray, a: float) -> Angles:
    swing = np.sin(p)
    return {
        'l_thigh': (_const(p, 0.0), 70.0 * a * np.maximum(0.0, swing)),
        'r_thigh': (_const(p, 0.0), 70.0 * a * np.maximum(0.0, -swing)),
        'l_arm': (_const(p, 0.0), -30.0 * a * swing),
        'l_fore': (_const(p, 0.0), -30.0 * a * swing),
        'r_arm': (_const(p, 0.0), 30.0 * a * swing),
        'r_fore': (_const(p, 0.0), 30.0 * a * swing),
    }


def _side_bend_left(p: np.ndarray, a: float) -> Angles:
    e = a * _rise(p)
    return {
        'side_lean': 30.0 * e,
        'r_arm': (160.0 * e, _const(p, 0.0)),
        'r_fore': (160.0 * e, _const(p, 0.0)),
    }


def _throw_right(p: np.ndarray, a: float) -> Angles:
    e = a * _rise(p)
    return {
        'r_arm': (150.0 - 70.0 * e, -30.0 + 110.0 * e),
        'r_fore': (170.0 - 90.0 * e, -40.0 + 130.0 * e),
        'lean': -10.0 + 25.0 * e,
    }


CLASS_CATALOG: Tuple[MotionPattern, ...] = (
    MotionPattern('wave_right', 2.0, _wave('r')),
    MotionPattern('wave_left', 2.0, _wave('l')),
    MotionPattern('punch_right', 2.0, _punch_right),
    MotionPattern('kick_right', 1.0, _kick_right),
    MotionPattern('squat', 1.0, _squat),
    MotionPattern('jumping_jacks', 2.0, _jumping_jacks),
    MotionPattern('clap', 3.0, _clap),
    MotionPattern('bow', 1.0, _bow),
    MotionPattern('raise_both_arms', 1.0, _raise_both_arms),
    MotionPattern('march', 2.0, _march),
    MotionPattern('side_bend_left', 1.0, _side_bend_left),
    MotionPattern('throw_right', 1.0, _throw_right),
)


def class_names() -> List[str]:
    return [pattern.name for pattern in CLASS_CATALOG]


# ============================================================
# Kinematics
# ============================================================
def _direction(side_deg: np.ndarray, forward_deg: np.ndarray, sign: float) -> np.ndarray:
    """Unit segment direction; (0, 0) hangs straight down, side angles open outward."""
    s = np.radians(side_deg)
    f = np.radians(forward_deg)
    return np.stack([sign * np.sin(s) * np.cos(f), -np.cos(s) * np.cos(f), np.sin(f)], axis=-1)


def _limb(angles: Angles, key: str, n: int, sign: float) -> np.ndarray:
    value = angles.get(key)
    if value is None:
        zeros = np.zeros(n)
        return _direction(zeros, zeros, sign)
    side_deg, forward_deg = value  # type: ignore[misc]
    return _direction(np.asarray(side_deg), np.asarray(forward_deg), sign)


def _trunk_rotation(lean_deg: np.ndarray, side_deg: np.ndarray) -> np.ndarray:
    lean = np.radians(lean_deg)
    side = np.radians(side_deg)
    n = lean.shape[0]
    r_lean = np.zeros((n, 3, 3))
    r_lean[:, 0, 0] = 1.0
    r_lean[:, 1, 1] = np.cos(lean)
    r_lean[:, 1, 2] = -np.sin(lean)
    r_lean[:, 2, 1] = np.sin(lean)
    r_lean[:, 2, 2] = np.cos(lean)
    r_side = np.zeros((n, 3, 3))
    r_side[:, 0, 0] = np.cos(side)
    r_side[:, 0, 1] = np.sin(side)
    r_side[:, 1, 0] = -np.sin(side)
    r_side[:, 1, 1] = np.cos(side)
    r_side[:, 2, 2] = 1.0
    return np.einsum('nij,njk->nik', r_side, r_lean)


def _assemble(angles: Angles, n: int, scale: float) -> np.ndarray:
    joints = np.zeros((n, 15, 3))
    neck = np.array([0.0, _NECK, 0.0]) * scale
    joints[:, 1] = neck
    joints[:, 2] = neck + np.array([0.0, _HEAD, 0.0]) * scale

    for side, sign, base in (('l', 1.0, 3), ('r', -1.0, 6)):
        shoulder = neck + np.array([sign * _SHOULDER, 0.0, 0.0]) * scale
        elbow = shoulder + _UPPER_ARM * scale * _limb(angles, f'{side}_arm', n, sign)
        hand = elbow + _FOREARM * scale * _limb(angles, f'{side}_fore', n, sign)
        joints[:, base] = shoulder
        joints[:, base + 1] = elbow
        joints[:, base + 2] = hand

    zeros = np.zeros(n)
    trunk = _trunk_rotation(
        np.asarray(angles.get('lean', zeros)),
        np.asarray(angles.get('side_lean', zeros)),
    )
    joints[:, 1:9] = np.einsum('nij,nkj->nki', trunk, joints[:, 1:9])

    for side, sign, base in (('l', 1.0, 9), ('r', -1.0, 12)):
        hip = np.array([sign * _HIP, 0.0, 0.0]) * scale
        knee = hip + _THIGH * scale * _limb(angles, f'{side}_thigh', n, sign)
        foot = knee + _SHIN * scale * _limb(angles, f'{side}_shin', n, sign)
        joints[:, base] = hip
        joints[:, base + 1] = knee
        joints[:, base + 2] = foot

    # keep the lower foot on the ground plane
    ground = -(_THIGH + _SHIN) * scale
    lowest = np.minimum(joints[:, 11, 1], joints[:, 14, 1])
    joints[:, :, 1] += (ground - lowest)[:, None]
    return joints


# ============================================================
# Public generator
# ============================================================
def generate_synthetic(
    class_id: int,
    num_frames: int,
    view_perturb: float = 0.0,
    speed_warp: float = 1.0,
    rng_seed: int = 0,
) -> SkeletonSequence:
    if isinstance(class_id, bool) or not isinstance(class_id, (int, np.integer)):
        raise InvalidArgument(f"class_id must be an integer, got {class_id!r}")
    if not 0 <= int(class_id) < len(CLASS_CATALOG):
        raise InvalidArgument(f"unknown class_id {class_id}; catalog has {len(CLASS_CATALOG)} classes")
    if num_frames < 2:
        raise InvalidArgument("num_frames must be >= 2")
    if not np.isfinite(speed_warp) or speed_warp <= 0:
        raise InvalidArgument("speed_warp must be a positive finite number")

    pattern = CLASS_CATALOG[int(class_id)]
    rng = np.random.default_rng([int(rng_seed), int(class_id)])
    amplitude = 1.0 + 0.1 * rng.uniform(-1.0, 1.0)
    phase_offset = 0.3 * rng.uniform(-1.0, 1.0)
    scale = 1.0 + 0.05 * rng.uniform(-1.0, 1.0)

    # the warped clip covers the same motion in fewer or more frames
    frames_out = max(2, int(round(num_frames / speed_warp)))
    phases = np.linspace(0.0, 2.0 * np.pi * pattern.cycles, frames_out) + phase_offset
    joints = _assemble(pattern.pose(phases, amplitude), frames_out, scale)
    joints = joints + rng.normal(0.0, 0.005, size=joints.shape)

    if view_perturb:
        rotation = euler_rotation(0.0, view_perturb, 0.0, 'xyz')
        joints = joints @ rotation.T

    return SkeletonSequence(frames=joints, graph=SkeletonGraph.default(), label=pattern.name)


__all__ = ["CLASS_CATALOG", "MotionPattern", "class_names", "generate_synthetic"]
