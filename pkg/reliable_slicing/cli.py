#!/usr/bin/env python3
"""
Command-line front end.

    sim reputation|train|evaluate|emit [--config PATH] [--seed N] [--out DIR]
        [--mode constrained|min-latency|min-dos] [--attacks] [--log-level LEVEL]

Exit status is 0 on success, with one JSON status line on stdout. Failures
print one JSON error line on stderr and exit with status 2.
"""

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from .core.experiments import ExperimentRunner, normalize_mode, run_name
from .core.figures import FigureDataExporter
from .errors import SlicingError
from .utils.config import load_config

logger = logging.getLogger(__name__)

EXIT_FAILURE = 2


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, help='JSON configuration file (defaults if omitted)')
    common.add_argument('--seed', type=int, default=None, help='root seed, overrides experiment.seed')
    common.add_argument('--out', default=None, help='output directory, overrides experiment.output_dir')
    common.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='stderr log level')
    return common


def _run_options() -> argparse.ArgumentParser:
    run = argparse.ArgumentParser(add_help=False)
    run.add_argument('--mode', default='constrained',
                     choices=['constrained', 'min-latency', 'min-dos'], help='allocator variant')
    run.add_argument('--attacks', action='store_true', help='reputation-driven attack scenario')
    return run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='sim',
        description='Reliable network-slicing allocation: reputation tracking, '
                    'constrained training and figure data.',
    )
    common, run = _common_options(), _run_options()
    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('reputation', parents=[common], help='reputation traces for every profile')
    train = commands.add_parser('train', parents=[common, run], help='train one allocator run')
    train.add_argument('--matched-seeds', action='store_true',
                       help='train every experiment.matched_seeds cell in parallel instead')
    commands.add_parser('evaluate', parents=[common, run], help='greedy rollouts of a trained run')
    commands.add_parser('emit', parents=[common], help='plot-ready CSV for every figure')
    return parser


def _execute(args: argparse.Namespace) -> Dict[str, Any]:
    config = load_config(args.config).with_overrides(seed=args.seed, output_dir=args.out)
    runner = ExperimentRunner(config)
    status: Dict[str, Any] = {'status': 'ok', 'command': args.command,
                              'seed': config.experiment.seed, 'out': str(runner.output_dir)}

    if args.command == 'reputation':
        traces = runner.run_reputation_experiment()
        status['profiles'] = sorted(traces)
    elif args.command == 'train':
        mode = normalize_mode(args.mode)
        status['run'] = run_name(mode, args.attacks)
        if args.matched_seeds:
            runs = runner.run_matched_seeds(mode, attacks=args.attacks)
            status['summaries'] = [run.summary for run in runs]
        else:
            status['summary'] = runner.run_training(mode, args.attacks).summary
    elif args.command == 'evaluate':
        mode = normalize_mode(args.mode)
        records = runner.run_evaluation(mode, args.attacks)
        status['run'] = run_name(mode, args.attacks)
        status['episodes'] = len(records)
    elif args.command == 'emit':
        exporter = FigureDataExporter(runner.output_dir, [p.name for p in config.reputation_profiles])
        status['figures'] = sorted(str(path) for path in exporter.export_figure_data().values())
    return status


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        status = _execute(args)
    except (SlicingError, OSError) as e:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(json.dumps({'status': 'error', 'error': type(e).__name__, 'message': str(e)}),
              file=sys.stderr)
        return EXIT_FAILURE
    print(json.dumps(status, sort_keys=True))
    return 0


if __name__ == '__main__':
    sys.exit(main())
