"""
Cli Module

Command-line entry point: ``register``, ``synth``, ``bench`` and ``eval`` subcommands.

Exit codes:
    0 success, 1 input/output or parse error, 2 degenerate registration, 3 schema or configuration mismatch.

Usage:

    python3 . register --query q.cogp --ref r.cogp --out pose.json
    python3 . synth --spec spec.json --out scenes/ --count 10
    python3 . bench --scenes scenes/ --modes argmax,confidence_ot --report report.json
    python3 . eval --pose pose.json --gt scenes/scene_0000/gt.json
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from modules.Config import Config, HYPER_PARAM_SETTINGS, REGISTRATION_SETTINGS
from modules.CustomExceptions import (ConfigError, DegenerateGeometry, InfeasibleOverlap, ParseError, PhaseError,
                                      RegistrationError, SchemaMismatch, ZeroWeight)
from modules.Visualization import Visualizer
from modules.fileformats.Cogp import load_cogp
from modules.fileformats.PoseJson import (confidence_path, parse_model, read_confidence, read_pose, write_confidence,
                                          write_pose)
from modules.fileformats.ReportJson import write_report
from modules.fileformats.SceneFiles import (GroundTruthModel, SceneSpecModel, list_scenes, read_ground_truth,
                                            read_scene, write_scene)
from modules.pipeline.Correspondence import MODES
from modules.pipeline.Registration import NN_METHODS, ROTATION_SEARCHES, register
from modules.scenegen.Benchmark import benchmark_pairs
from modules.scenegen.Metrics import OVERLAP_THRESHOLD, overlap_iou, rotation_error, translation_error
from modules.scenegen.SceneGenerator import generate_scene

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_DEGENERATE = 2
EXIT_SCHEMA = 3


def _flag_name(key: str) -> str:
    return '--' + key.replace('_', '-')


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--params', help='YAML or JSON file whose keys mirror the flags (flags win)')
    parser.add_argument('--loglevel', choices=['error', 'warning', 'info', 'debug'], help='log level (default: info)')
    parser.add_argument('--logs', help='log file (default: stderr)')


def _add_switch(group, name: str, dest: str, default, help_text: str) -> None:
    """Adds a ``--name`` / ``--no-name`` pair writing True / False into ``dest``."""
    group.add_argument(f"--{name}", dest=dest, action="store_const", const=True, default=default, help=help_text)
    group.add_argument(f"--no-{name}", dest=dest, action="store_const", const=False, default=default,
                       help=argparse.SUPPRESS)


def _add_setting_arguments(parser: argparse.ArgumentParser) -> None:
    hyper = parser.add_argument_group('hyper-parameters')
    registration = parser.add_argument_group('registration')
    for settings, group in ((HYPER_PARAM_SETTINGS, hyper), (REGISTRATION_SETTINGS, registration)):
        for key, setting in settings.items():
            default = Config.DEFAULT_HYPER_PARAMS if setting.target == 'hp' else Config.DEFAULT_REGISTRATION
            help_text = f"{setting.help} (default: {getattr(default, setting.field)})"
            kwargs = {'dest': key, 'default': None, 'help': help_text}
            if key in ('normalize_scale', 'warm_start', 'symmetric_transport'):
                name = key.replace('_', '-')
                _add_switch(group, name, key, None, f"{help_text}, --no-{name} to disable")
            elif key == 'mode':
                group.add_argument(_flag_name(key), choices=MODES, **kwargs)
            elif key == 'nn_method':
                group.add_argument(_flag_name(key), choices=NN_METHODS, **kwargs)
            elif key == 'rotation_search':
                group.add_argument(_flag_name(key), choices=ROTATION_SEARCHES, **kwargs)
            elif key == 'descriptor_scales':
                group.add_argument(_flag_name(key), type=str, **kwargs)
            else:
                group.add_argument(_flag_name(key), type=setting.cast, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='cogreg',
                                     description='Confidence-aware optimal transport point cloud registration')
    subparsers = parser.add_subparsers(dest='command', required=True)

    register_parser = subparsers.add_parser('register', help='register a query cloud onto a reference cloud')
    register_parser.add_argument('--query', required=True, help='query COGP file')
    register_parser.add_argument('--ref', required=True, help='reference COGP file')
    register_parser.add_argument('--out', default='pose.json', help='pose file to write (default: pose.json)')
    _add_switch(register_parser, 'sidecar', 'sidecar', True,
                'also write per-point confidences next to the pose, --no-sidecar to skip (default: on)')
    _add_setting_arguments(register_parser)
    _add_common_arguments(register_parser)

    synth_parser = subparsers.add_parser('synth', help='generate synthetic scene pairs')
    synth_parser.add_argument('--spec', required=True, help='JSON scene spec')
    synth_parser.add_argument('--out', required=True, help='output directory')
    synth_parser.add_argument('--count', type=int, default=1,
                              help='number of scenes, seeds counted up from the spec seed (default: 1)')
    synth_parser.add_argument('--binary', action='store_true', help='write binary COGP files')
    _add_common_arguments(synth_parser)

    bench_parser = subparsers.add_parser('bench', help='benchmark correspondence modes over scene pairs')
    bench_parser.add_argument('--scenes', required=True, help='directory of scene directories')
    bench_parser.add_argument('--modes', default='confidence_ot',
                              help=f"comma-separated modes among {','.join(MODES)} (default: confidence_ot)")
    bench_parser.add_argument('--report', required=True, help='report JSON file to write')
    bench_parser.add_argument('--threads', type=int, default=None, help='worker threads (default: 1)')
    bench_parser.add_argument('--timings', action='store_true', default=None,
                              help='record wall-clock seconds per scene in the report')
    bench_parser.add_argument('--csv', help='also write the per-scene rows as CSV')
    bench_parser.add_argument('--plot', help='also plot the rotation error CDF per mode')
    _add_setting_arguments(bench_parser)
    _add_common_arguments(bench_parser)

    eval_parser = subparsers.add_parser('eval', help='compare a pose file with a ground-truth file')
    eval_parser.add_argument('--pose', required=True, help='pose file')
    eval_parser.add_argument('--gt', required=True, help='ground-truth file of a scene')
    eval_parser.add_argument('--confidence', help='confidence file (default: the sidecar of the pose file)')
    eval_parser.add_argument('--threshold', type=float, default=OVERLAP_THRESHOLD,
                             help=f'confidence threshold of the overlap IoU (default: {OVERLAP_THRESHOLD})')
    _add_common_arguments(eval_parser)

    parser.subcommand_parsers = {
        'register': register_parser, 'synth': synth_parser, 'bench': bench_parser, 'eval': eval_parser,
    }
    return parser


def flag_names() -> Dict[str, List[str]]:
    """Long flags of every subcommand, for documentation checks."""
    return {
        name: [option for action in sub._actions for option in action.option_strings
               if option.startswith('--') and option != '--help']
        for name, sub in build_parser().subcommand_parsers.items()
    }


def cmd_register(options: argparse.Namespace, config: Config) -> int:
    cfg = config.registration_config()
    query = load_cogp(options.query)
    reference = load_cogp(options.ref)
    result = register(query, reference, cfg)

    metrics = {**result.metrics, "loss_total": result.losses.total}
    out = Path(options.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(write_pose(result.pose, metrics))
    logger.info(f"pose written to {out}")
    if options.sidecar:
        sidecar = confidence_path(out)
        sidecar.write_bytes(write_confidence(*result.full_confidence(query.n, reference.n)))
        logger.info(f"confidences written to {sidecar}")
    return EXIT_OK


def cmd_synth(options: argparse.Namespace, config: Config) -> int:
    spec_model = parse_model(SceneSpecModel, Path(options.spec).read_bytes(), f"scene spec {options.spec}")
    if options.count < 1:
        raise ConfigError(f"--count must be >= 1, got {options.count}")
    base = spec_model.to_spec()
    out = Path(options.out)
    for index in range(options.count):
        spec = spec_model.model_copy(update={'seed': base.seed + index}).to_spec()
        directory = write_scene(out / f"scene_{index:04d}", generate_scene(spec), binary=options.binary)
        logger.info(f"scene seed={spec.seed} written to {directory}")
    return EXIT_OK


def cmd_bench(options: argparse.Namespace, config: Config) -> int:
    modes = [mode.strip() for mode in options.modes.split(',') if mode.strip()]
    unknown = [mode for mode in modes if mode not in MODES]
    if not modes or unknown:
        raise ConfigError(f"--modes must list modes among {', '.join(MODES)}, got {options.modes!r}")
    cfg = config.registration_config()

    pairs = [(name, read_scene(path)) for name, path in list_scenes(options.scenes)]
    report = benchmark_pairs(pairs, cfg, modes, threads=config.threads, record_timings=config.record_timings)

    Path(options.report).write_bytes(write_report(report))
    logger.info(f"report over {report.n_scenes} scenes written to {options.report}")
    if options.csv:
        report.to_frame().to_csv(options.csv, index=False)
    if options.plot:
        Visualizer().rotation_error_cdf(report, options.plot)
    return EXIT_OK


def _eval_confidences(options: argparse.Namespace):
    if options.confidence:
        return read_confidence(Path(options.confidence).read_bytes())
    sidecar = confidence_path(options.pose)
    if sidecar.is_file():
        return read_confidence(sidecar.read_bytes())
    try:
        masks = parse_model(GroundTruthModel, Path(options.pose).read_bytes(), "pose file")
    except SchemaMismatch:
        return None
    return [float(value) for value in masks.gt_overlap_q], [float(value) for value in masks.gt_overlap_r]


def cmd_eval(options: argparse.Namespace, config: Config) -> int:
    pose, _ = read_pose(Path(options.pose).read_bytes())
    gt = read_ground_truth(Path(options.gt).read_bytes())
    gt_pose, _ = read_pose(Path(options.gt).read_bytes())

    print(f"rotation_error_deg={rotation_error(gt_pose, pose)!r}")
    print(f"translation_error={translation_error(gt_pose, pose)!r}")

    confidences = _eval_confidences(options)
    if confidences is None:
        logger.warning("no confidences available, overlap IoU skipped")
        return EXIT_OK
    conf_q, conf_r = confidences
    if len(conf_q) != len(gt.gt_overlap_q) or len(conf_r) != len(gt.gt_overlap_r):
        raise SchemaMismatch("confidence lengths do not match the ground-truth masks")
    iou = (overlap_iou(conf_q, gt.gt_overlap_q, options.threshold)
           + overlap_iou(conf_r, gt.gt_overlap_r, options.threshold)) / 2.0
    print(f"overlap_iou={iou!r}")
    return EXIT_OK


COMMANDS = {'register': cmd_register, 'synth': cmd_synth, 'bench': cmd_bench, 'eval': cmd_eval}


def _phase_exit_code(error: PhaseError) -> int:
    """Exit code of a failed phase, taken from the error it wraps."""
    match error.original:
        case DegenerateGeometry() | ZeroWeight():
            return EXIT_DEGENERATE
        case ConfigError() | SchemaMismatch() | InfeasibleOverlap():
            return EXIT_SCHEMA
        case _:
            return EXIT_IO


def main(argv: Optional[List[str]] = None) -> int:
    """Parses ``argv`` (default ``sys.argv[1:]``), runs the subcommand and returns its exit code."""
    options = build_parser().parse_args(argv)
    try:
        config = Config(options=options)
        return COMMANDS[options.command](options, config)
    except (ConfigError, SchemaMismatch, InfeasibleOverlap) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_SCHEMA
    except PhaseError as e:
        logger.error(f"registration failed: {e}")
        return _phase_exit_code(e)
    except (DegenerateGeometry, ZeroWeight) as e:
        logger.error(f"degenerate registration: {e}")
        return EXIT_DEGENERATE
    except (ParseError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_IO
    except (RegistrationError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_IO


if __name__ == '__main__':
    sys.exit(main())
