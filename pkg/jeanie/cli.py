from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, TypeVar

import numpy as np

from jeanie.config import APP_CONFIG
from jeanie.core.alignment import align_features
from jeanie.core.encoders import EncodingNetwork
from jeanie.core.evaluation import evaluate_protocol
from jeanie.core.fewshot import SequencePool, build_pool, encode_sequence, restrict_pool
from jeanie.core.geometry import generate_view_grid
from jeanie.core.skeleton import validate_sequence
from jeanie.core.synthetic import CLASS_CATALOG, generate_synthetic
from jeanie.core.training import train_episodic
from jeanie.data.camera import load_camera
from jeanie.data.checkpoint import load_checkpoint, save_checkpoint
from jeanie.data.exporter import ReportExporter, emit_report
from jeanie.data.models import (
    AlignmentConfig,
    CameraPose,
    EncoderConfig,
    ProtocolConfig,
    RunManifest,
    SkeletonSequence,
    ViewGrid,
)
from jeanie.data.skel_json import load_corpus, load_skel_file, save_skel_file
from jeanie.data.store_utils import read_json, save_json_atomic
from jeanie.errors import DATA_ERRORS, DataFileError, InvalidArgument, JeanieError, ProtocolViolation
from jeanie.logging import logger

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

T = TypeVar('T')


def exception_hook(exctype, value, traceback_obj):
    """Log uncaught exceptions before the default hook prints them."""
    traceback_str = ''.join(traceback.format_tb(traceback_obj))
    logger.critical("Uncaught exception:\n%s: %s\n\n%s", exctype.__name__, value, traceback_str)
    sys.__excepthook__(exctype, value, traceback_obj)


# ============================================================
# 입력/출력 헬퍼
# ============================================================
def load_input(path: Path, loader: Callable[[Path], T]) -> T:
    try:
        return loader(path)
    except DataFileError:
        raise
    except (*DATA_ERRORS, OSError) as exc:
        raise DataFileError(str(path), exc) from exc


def _load_sequence(path: Path) -> SkeletonSequence:
    seq = load_input(path, load_skel_file)
    try:
        validate_sequence(seq)
    except DATA_ERRORS as exc:
        raise DataFileError(str(path), exc) from exc
    return seq


def load_camera_pose(path: Optional[str], base: Optional[Path] = None) -> Optional[CameraPose]:
    if not path:
        return None
    camera_path = Path(path)
    if base is not None and not camera_path.is_absolute():
        camera_path = base / camera_path
    return load_input(camera_path, load_camera).pose


def load_protocol(path: Path) -> ProtocolConfig:
    return ProtocolConfig.from_dict(load_input(path, lambda p: read_json(p, 'protocol')))


def _save_json(path: Path, payload: Any, label: str, indent: Optional[int] = 2) -> None:
    if not save_json_atomic(path, payload, label, indent=indent):
        raise DataFileError(str(path), OSError(f"could not write {label}"))


def _write_manifest(manifest: RunManifest, out_dir: Optional[Path]) -> None:
    if out_dir is None:
        return
    _save_json(out_dir / str(APP_CONFIG['MANIFEST_FILE']), manifest.to_dict(), 'manifest')


def pool_from_dir(data_dir: Path) -> Dict[str, List[SkeletonSequence]]:
    return build_pool(load_input(data_dir, load_corpus))


def _train_pool(pool: SequencePool, protocol: ProtocolConfig) -> Dict[str, List[SkeletonSequence]]:
    overlap = sorted(set(protocol.train_classes) & set(protocol.test_classes))
    if overlap:
        raise ProtocolViolation(f"train and test classes overlap: {', '.join(overlap)}")
    classes = protocol.train_classes or [label for label in pool if label not in set(protocol.test_classes)]
    return restrict_pool(pool, classes)


def _require(args: Mapping[str, Any], key: str) -> Any:
    value = args.get(key)
    if value is None:
        raise InvalidArgument(f"missing required argument --{key.replace('_', '-')}")
    return value


# ============================================================
# 하위 명령
# ============================================================
def _gen_synth(manifest: RunManifest) -> None:
    args = manifest.args
    classes = int(_require(args, 'classes'))
    per_class = int(_require(args, 'per_class'))
    frames = int(args.get('frames') or APP_CONFIG['SYNTH_FRAMES'])
    out_dir = Path(_require(args, 'out'))
    if not 1 <= classes <= len(CLASS_CATALOG):
        raise InvalidArgument(f"--classes must lie in [1, {len(CLASS_CATALOG)}], got {classes}")
    if per_class < 1:
        raise InvalidArgument("--per-class must be >= 1")

    max_perturb = float(APP_CONFIG['SYNTH_MAX_PERTURB'])
    warp_lo, warp_hi = APP_CONFIG['SYNTH_WARP_RANGE']
    rng = np.random.default_rng(manifest.seed)
    suffix = str(APP_CONFIG['SKEL_SUFFIX'])
    for class_id in range(classes):
        name = CLASS_CATALOG[class_id].name
        for index in range(per_class):
            perturb = float(rng.uniform(-max_perturb, max_perturb))
            warp = float(rng.uniform(warp_lo, warp_hi))
            sample_seed = int(rng.integers(0, 2 ** 31 - 1))
            seq = generate_synthetic(class_id, frames, perturb, warp, sample_seed)
            path = out_dir / f"{name}_{index:03d}{suffix}"
            try:
                save_skel_file(path, seq)
            except OSError as exc:
                raise DataFileError(str(path), exc) from exc

    manifest.config = {'classes': classes, 'per_class': per_class, 'frames': frames,
                       'max_perturb': max_perturb, 'warp_range': [warp_lo, warp_hi]}
    logger.info("Generated %s synthetic sequences in %s", classes * per_class, out_dir)
    _write_manifest(manifest, out_dir)


def _simulate_views(manifest: RunManifest) -> None:
    args = manifest.args
    in_path = Path(_require(args, 'input'))
    out_dir = Path(_require(args, 'out'))
    grid = ViewGrid.from_dict({
        'eta_az': args.get('eta_az'),
        'eta_alt': args.get('eta_alt'),
        'step_deg': args.get('step'),
        'mode': args.get('mode'),
    })
    seq = _load_sequence(in_path)
    camera = load_camera_pose(args.get('camera'))
    views = generate_view_grid(seq, grid, camera)

    suffix = str(APP_CONFIG['SKEL_SUFFIX'])
    stem = in_path.name[:-len(suffix)] if in_path.name.endswith(suffix) else in_path.stem
    k_alt = grid.shape[1]
    for index, view in enumerate(views):
        path = out_dir / f"{stem}.view_{index // k_alt:02d}_{index % k_alt:02d}{suffix}"
        try:
            save_skel_file(path, view)
        except OSError as exc:
            raise DataFileError(str(path), exc) from exc

    manifest.config = {'grid': grid.to_dict(), 'views': grid.angles()}
    logger.info("Wrote %s simulated views of %s to %s", len(views), in_path, out_dir)
    _write_manifest(manifest, out_dir)


def _align(manifest: RunManifest) -> None:
    args = manifest.args
    query = _load_sequence(Path(_require(args, 'query')))
    support = _load_sequence(Path(_require(args, 'support')))
    raw: Dict[str, Any] = {}
    if args.get('config'):
        raw = load_input(Path(args['config']), lambda p: read_json(p, 'align config'))
        if not isinstance(raw, dict):
            raise InvalidArgument("align config must be a JSON object")
    cfg = AlignmentConfig.from_dict(raw)
    grid = ViewGrid.from_dict(raw)
    axes = int(raw.get('axes') or 2)
    support_views = bool(raw.get('support_views', False))
    camera = load_camera_pose(raw.get('camera'))

    if args.get('checkpoint'):
        encoder = load_input(Path(args['checkpoint']), load_checkpoint)
    else:
        encoder_cfg = EncoderConfig.from_dict({**(raw.get('encoder') or {}), 'seed': raw.get('seed', manifest.seed)})
        encoder = EncodingNetwork(encoder_cfg, query.graph)

    q = encode_sequence(query, encoder, grid, camera)
    # jeanie and fvm see the same view set
    s_plain = encode_sequence(support, encoder, None, camera)
    s_views = encode_sequence(support, encoder, grid, camera) if support_views else s_plain
    result = {
        'd_jeanie': align_features(q, s_views, cfg, 'jeanie', axes),
        'd_softdtw': align_features(q, s_plain, cfg, 'softdtw'),
        'd_fvm': align_features(q, s_views, cfg, 'fvm'),
    }
    print(json.dumps(result))

    manifest.config = {'alignment': cfg.to_dict(), 'grid': grid.to_dict(), 'axes': axes, 'support_views': support_views,
                       'encoder': encoder.config.to_dict()}
    out = args.get('out')
    if out:
        out_dir = Path(out)
        _save_json(out_dir / 'distances.json', result, 'distances')
        _write_manifest(manifest, out_dir)


def _train(manifest: RunManifest) -> None:
    args = manifest.args
    out_dir = Path(_require(args, 'out'))
    protocol_path = Path(_require(args, 'protocol'))
    protocol = load_protocol(protocol_path)
    pool = _train_pool(pool_from_dir(Path(_require(args, 'data'))), protocol)
    camera = load_camera_pose(protocol.camera, protocol_path.parent)

    graph = next(iter(pool.values()))[0].graph
    encoder_cfg = EncoderConfig.from_dict({**protocol.encoder.to_dict(), 'seed': protocol.seed})
    encoder = EncodingNetwork(encoder_cfg, graph)
    encoder, trace = train_episodic(
        pool, protocol.train_config(), encoder, protocol.alignment, protocol.grid, camera,
        method=protocol.method, axes=protocol.axes, support_views=protocol.support_views,
    )

    extra = {'protocol': protocol.to_dict(), 'train_classes': sorted(pool), 'steps': len(trace)}
    if not save_checkpoint(out_dir / 'checkpoint.json', encoder, extra):
        raise DataFileError(str(out_dir / 'checkpoint.json'), OSError("could not write checkpoint"))
    try:
        ReportExporter.export_loss_trace(trace, out_dir / 'loss_trace.csv')
    except OSError as exc:
        raise DataFileError(str(out_dir / 'loss_trace.csv'), exc) from exc

    manifest.config = protocol.to_dict()
    manifest.seed = protocol.seed
    _write_manifest(manifest, out_dir)


def _eval(manifest: RunManifest) -> None:
    args = manifest.args
    out_dir = Path(_require(args, 'out'))
    protocol_path = Path(_require(args, 'protocol'))
    protocol = load_protocol(protocol_path)
    pool = pool_from_dir(Path(_require(args, 'data')))
    encoder = load_input(Path(_require(args, 'checkpoint')), load_checkpoint)
    camera = load_camera_pose(protocol.camera, protocol_path.parent)

    report = evaluate_protocol(pool, protocol, encoder, camera=camera)
    try:
        emit_report(report, out_dir, series=protocol.method)
    except OSError as exc:
        raise DataFileError(str(out_dir), exc) from exc

    manifest.config = protocol.to_dict()
    manifest.seed = protocol.seed
    _write_manifest(manifest, out_dir)


def _replay(manifest: RunManifest) -> None:
    path = Path(_require(manifest.args, 'manifest'))
    recorded = RunManifest.from_dict(load_input(path, lambda p: read_json(p, 'manifest')))
    if recorded.command == 'replay':
        raise InvalidArgument("a replay manifest cannot be replayed")
    logger.info("Replaying %s from %s", recorded.command, path)
    _dispatch(recorded)


COMMANDS: Dict[str, Callable[[RunManifest], None]] = {
    'gen-synth': _gen_synth,
    'simulate-views': _simulate_views,
    'align': _align,
    'train': _train,
    'eval': _eval,
    'replay': _replay,
}


def _dispatch(manifest: RunManifest) -> None:
    handler = COMMANDS.get(manifest.command)
    if handler is None:
        raise InvalidArgument(f"unknown command {manifest.command!r}")
    handler(manifest)


def run_experiment(manifest: RunManifest) -> int:
    """Run one subcommand; 0 on success, 2 for config errors, 3 for data errors."""
    try:
        _dispatch(manifest)
    except DATA_ERRORS as exc:
        print(f"{APP_CONFIG['APP_NAME']} {manifest.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        name = exc.filename or 'input'
        print(f"{APP_CONFIG['APP_NAME']} {manifest.command}: {name}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_DATA
    except (JeanieError, ValueError) as exc:
        print(f"{APP_CONFIG['APP_NAME']} {manifest.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


# ============================================================
# argparse
# ============================================================
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=str(APP_CONFIG['APP_NAME']),
        description='Joint temporal and viewpoint alignment for few-shot skeleton action recognition.',
    )
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen-synth', help='Emit a synthetic SKEL-JSON corpus.')
    gen.add_argument('--classes', type=int, required=True, help='Number of catalog classes.')
    gen.add_argument('--per-class', type=int, required=True, help='Sequences per class.')
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--frames', type=int, default=int(APP_CONFIG['SYNTH_FRAMES']))
    gen.add_argument('--out', required=True, help='Output directory.')

    views = sub.add_parser('simulate-views', help='Emit the simulated view grid of one sequence.')
    views.add_argument('--in', dest='input', required=True, help='SKEL-JSON input file.')
    views.add_argument('--mode', choices=['euler', 'camvpc'], default='euler')
    views.add_argument('--step', type=float, default=float(APP_CONFIG['STEP_DEG']), help='Grid step in degrees.')
    views.add_argument('--eta-az', type=int, default=int(APP_CONFIG['ETA_AZ']))
    views.add_argument('--eta-alt', type=int, default=int(APP_CONFIG['ETA_ALT']))
    views.add_argument('--camera', help='Stereo rig JSON (camvpc mode).')
    views.add_argument('--out', required=True, help='Output directory.')

    align = sub.add_parser('align', help='Print JEANIE, soft-DTW and FVM distances as JSON.')
    align.add_argument('--query', required=True)
    align.add_argument('--support', required=True)
    align.add_argument('--config', help='Alignment config JSON.')
    align.add_argument('--checkpoint', help='Trained encoder; a seeded initialization is used otherwise.')
    align.add_argument('--out', help='Optional directory for distances.json and the manifest.')

    train = sub.add_parser('train', help='Episodic training; writes a checkpoint and loss trace.')
    train.add_argument('--data', required=True, help='Directory of SKEL-JSON files.')
    train.add_argument('--protocol', required=True, help='Protocol config JSON.')
    train.add_argument('--out', required=True)

    evaluate = sub.add_parser('eval', help='Few-shot evaluation; writes report and plot data CSVs.')
    evaluate.add_argument('--data', required=True, help='Directory of SKEL-JSON files.')
    evaluate.add_argument('--protocol', required=True, help='Protocol config JSON.')
    evaluate.add_argument('--checkpoint', required=True)
    evaluate.add_argument('--out', required=True)

    replay = sub.add_parser('replay', help='Re-run a recorded manifest.')
    replay.add_argument('--manifest', required=True)
    return parser


def manifest_from_args(namespace: argparse.Namespace) -> RunManifest:
    args = {key: value for key, value in vars(namespace).items() if key != 'command'}
    return RunManifest(
        command=namespace.command,
        args=args,
        seed=int(args.get('seed') or 0),
        out_dir=args.get('out'),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    sys.excepthook = exception_hook
    namespace = build_parser().parse_args(argv)
    manifest = manifest_from_args(namespace)
    logger.info("Starting %s v%s: %s", APP_CONFIG['APP_NAME'], APP_CONFIG['VERSION'], manifest.command)
    return run_experiment(manifest)


if __name__ == '__main__':
    raise SystemExit(main())
