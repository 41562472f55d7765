from __future__ import annotations

import argparse
import json
from pathlib import Path

from common import ensure_repo_on_path, parse_values

ensure_repo_on_path()

from jeanie.cli import EXIT_CONFIG, EXIT_DATA, load_camera_pose, load_input, load_protocol, pool_from_dir
from jeanie.core.evaluation import SWEEP_PARAMS, sweep_protocol
from jeanie.data.checkpoint import load_checkpoint
from jeanie.data.exporter import ReportExporter
from jeanie.errors import DATA_ERRORS, JeanieError


def main() -> int:
    parser = argparse.ArgumentParser(description='Evaluate one protocol over a sweep of alignment or grid values.')
    parser.add_argument('--data', required=True, help='Directory of SKEL-JSON files.')
    parser.add_argument('--protocol', required=True, help='Protocol config JSON.')
    parser.add_argument('--checkpoint', required=True, help='Trained encoder checkpoint.')
    parser.add_argument('--param', choices=SWEEP_PARAMS, required=True)
    parser.add_argument('--values', required=True, help='Comma-separated values, e.g. 1,2,3,4.')
    parser.add_argument('--out', required=True, help='Output plotdata CSV path.')
    args = parser.parse_args()

    try:
        protocol_path = Path(args.protocol)
        protocol = load_protocol(protocol_path)
        pool = pool_from_dir(Path(args.data))
        encoder = load_input(Path(args.checkpoint), load_checkpoint)
        camera = load_camera_pose(protocol.camera, protocol_path.parent)
        points = sweep_protocol(pool, protocol, encoder, args.param, parse_values(args.values), camera)
    except DATA_ERRORS as exc:
        print(f'run_sweep: {exc}')
        return EXIT_DATA
    except JeanieError as exc:
        print(f'run_sweep: {exc}')
        return EXIT_CONFIG

    ReportExporter.export_plotdata_csv(points, Path(args.out))
    print(json.dumps({'ok': True, 'param': args.param, 'points': len(points), 'outputPath': args.out}, indent=2))
    return 0


if __name__ == '__main__':
    raise SystemExit(main())
