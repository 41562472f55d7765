import os

from jeanie import __version__


# ============================================================
# 상수 정의
# ============================================================
APP_CONFIG = {
    'APP_NAME': 'jeanie',
    'VERSION': __version__,
    'CHECKPOINT_MAGIC': 'JEANIE-CKPT-1',
    'MANIFEST_FILE': 'manifest.json',
    'SKEL_SUFFIX': '.skel.json',
    # temporal blocks
    'BLOCK_SIZE': 8,
    'BLOCK_STRIDE': 5,
    # encoder
    'FEATURE_DIM': 32,
    'OUTPUT_DIM': 50,
    'GNN_VARIANT': 'S2GC',
    'GNN_LAYERS': 6,
    'GNN_ALPHA': 0.5,
    'DROPOUT': 0.5,
    'INIT_STD': 1.0,
    'LAYER_NORM_EPS': 1e-5,
    # alignment
    'GAMMA': 1e-4,
    'IOTA': 2,
    'BASE_DISTANCE': 'EUCLIDEAN',
    'RBF_SIGMA': 2.0,
    # view grid
    'VIEW_MODE': 'EULER',
    'STEP_DEG': 15.0,
    'ETA_AZ': 3,
    'ETA_ALT': 3,
    'EULER_ORDER': 'xyz',
    # few-shot
    'N_WAY': 5,
    'Z_SHOT': 1,
    'BATCH': 8,
    'EPISODES': 1000,
    'EVAL_EPISODES': 500,
    'LOSS_BETA': 1,
    'LOSS_VARIANT': 'MAIN',
    'LOSS_C': 0.0,
    'LEARNING_RATE': 1e-3,
    'WEIGHT_DECAY': 1e-6,
    'LOG_EVERY': 10,
    'GRAD_CLIP': 10.0,
    # artifacts
    'FLOAT_DIGITS': 9,
    'MAX_ORACLE_PATHS': 10 ** 7,
    'SYNTH_FRAMES': 40,
    'SYNTH_MAX_PERTURB': 30.0,
    'SYNTH_WARP_RANGE': (0.8, 1.25),
}

# UWA3D-sized 15-joint tree, joint 0 is the torso/hip centre
DEFAULT_SKELETON = {
    'num_joints': 15,
    'hip_index': 0,
    'joint_names': [
        'torso', 'neck', 'head',
        'l_shoulder', 'l_elbow', 'l_hand',
        'r_shoulder', 'r_elbow', 'r_hand',
        'l_hip', 'l_knee', 'l_foot',
        'r_hip', 'r_knee', 'r_foot',
    ],
    'edges': [
        (0, 1), (1, 2),
        (1, 3), (3, 4), (4, 5),
        (1, 6), (6, 7), (7, 8),
        (0, 9), (9, 10), (10, 11),
        (0, 12), (12, 13), (13, 14),
    ],
}


def resolve_threads(default: int = 1) -> int:
    """Worker cap from JEANIE_THREADS; falls back to ``default`` on bad values."""
    raw = os.environ.get('JEANIE_THREADS', '').strip()
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        from jeanie.logging import logger
        logger.warning("Ignoring invalid JEANIE_THREADS=%r", raw)
        return default
    return max(1, value)


def format_float(value: float) -> str:
    return format(float(value), f".{APP_CONFIG['FLOAT_DIGITS']}g")
