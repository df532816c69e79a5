# -*- coding: utf-8 -*-
#
# Copyright (c) 2024, Leigh McKenzie
# All rights reserved.
#
# Permission to use, copy, modify, and/or distribute this software for any
# purpose with or without fee is hereby granted, provided that the above
# copyright notice and this permission notice appear in all copies.
#
# THE SOFTWARE IS PROVIDED "AS IS" AND THE AUTHOR DISCLAIMS ALL WARRANTIES
# WITH REGARD TO THIS SOFTWARE INCLUDING ALL IMPLIED WARRANTIES OF
# MERCHANTABILITY AND FITNESS. IN NO EVENT SHALL THE AUTHOR BE LIABLE FOR
# ANY SPECIAL, DIRECT, INDIRECT, OR CONSEQUENTIAL DAMAGES OR ANY DAMAGES
# WHATSOEVER RESULTING FROM LOSS OF USE, DATA OR PROFITS, WHETHER IN AN
# ACTION OF CONTRACT, NEGLIGENCE OR OTHER TORTIOUS ACTION, ARISING OUT OF
# OR IN CONNECTION WITH THE USE OR PERFORMANCE OF THIS SOFTWARE.
"""
Command-line entry point.

    unlearnrec prepare --config exp.yaml [--dump-rendered]
    unlearnrec train   --config exp.yaml
    unlearnrec run     --config exp.yaml --methods e2urec,neggrad
    unlearnrec ablate  --config exp.yaml
    unlearnrec report  --out runs
"""

import argparse
import logging
import sys

from unlearnrec import __version__
from unlearnrec.config import load_config
from unlearnrec.display import Display
from unlearnrec.exceptions import CheckpointError, ConfigError, DataError, TrainingError, UnlearnRecError
from unlearnrec.runner import cmd_ablate, cmd_prepare, cmd_report, cmd_run, cmd_train

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAINING = 4

_logger = logging.getLogger(__name__)


def _methods(value):
    methods = [method.strip() for method in value.split(',') if method.strip()]
    if not methods:
        raise argparse.ArgumentTypeError('expected a comma-separated list of methods')
    return methods


def build_parser():
    parser = argparse.ArgumentParser(prog='unlearnrec',
                                     description='Train an LM click recommender and unlearn selected users.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + __version__)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='experiment YAML file; defaults apply when omitted')
    common.add_argument('--seed', type=int, help='run a single seed, replacing any configured seeds')
    common.add_argument('--out', help='output directory')
    common.add_argument('-v', '--verbose', action='count', default=0, help='-v for INFO, -vv for DEBUG')

    commands = parser.add_subparsers(dest='command', required=True)
    prepare = commands.add_parser('prepare', parents=[common], help='render, split and partition the data')
    prepare.add_argument('--dump-rendered', action='store_true', help='write every rendered prompt as JSON lines')
    commands.add_parser('train', parents=[common], help='train the original and retrained models')
    run = commands.add_parser('run', parents=[common], help='run unlearning methods and score them')
    run.add_argument('--methods', type=_methods, help='comma-separated method keys')
    run.add_argument('--parallel-methods', action='store_true',
                     help='run methods concurrently; wall times are then not comparable')
    commands.add_parser('ablate', parents=[common], help='compare the loss ablations of the teacher-student method')
    commands.add_parser('report', parents=[common], help='print the comparison table of finished runs')
    return parser


def _exit_code(error):
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    if isinstance(error, (DataError, CheckpointError)):
        return EXIT_DATA
    if isinstance(error, TrainingError):
        return EXIT_TRAINING
    return EXIT_FAILURE


def main(argv=None):
    """
    Run one subcommand.

    Returns:
        int: 0 on success, 2 for configuration errors, 3 for data or
            checkpoint errors, 4 for training errors, 1 otherwise.
    """
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        config = load_config(args.config).with_overrides(seed=args.seed, methods=getattr(args, 'methods', None),
                                                         output_dir=args.out)
        if args.command == 'prepare':
            cmd_prepare(config, dump=args.dump_rendered)
        elif args.command == 'train':
            cmd_train(config)
        elif args.command == 'run':
            print(Display().comparison_table(cmd_run(config, parallel=args.parallel_methods)))
        elif args.command == 'ablate':
            print(Display().ablation_table(cmd_ablate(config)))
        else:
            print(cmd_report(config))
    except UnlearnRecError as error:
        _logger.debug('Command "%s" failed', args.command, exc_info=True)
        print('unlearnrec %s: %s' % (args.command, error), file=sys.stderr)
        return _exit_code(error)
    except OSError as error:
        print('unlearnrec %s: %s' % (args.command, error), file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
