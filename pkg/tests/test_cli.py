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

import os

import pytest
import yaml

from unlearnrec.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, EXIT_TRAINING, _exit_code, build_parser, main
from unlearnrec.exceptions import CorruptCheckpointError, TrainingError


@pytest.fixture
def config_path(tiny_tree, tmp_path):
    path = tmp_path / 'exp.yaml'
    path.write_text(yaml.safe_dump(tiny_tree), encoding='utf-8')
    return str(path)


class TestParser:
    def test_methods_are_split(self):
        args = build_parser().parse_args(['run', '--methods', 'e2urec, neggrad'])
        assert args.methods == ['e2urec', 'neggrad']

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_exit_codes(self):
        assert _exit_code(CorruptCheckpointError('bad')) == EXIT_DATA
        assert _exit_code(TrainingError('nan')) == EXIT_TRAINING


class TestMain:
    def test_prepare_then_run(self, config_path, tmp_path, capsys):
        out = str(tmp_path / 'runs')
        assert main(['prepare', '--config', config_path, '--out', out, '--dump-rendered']) == EXIT_OK
        assert main(['run', '--config', config_path, '--out', out, '--methods', 'neggrad,e2urec']) == EXIT_OK
        table = capsys.readouterr().out
        assert 'NegGrad' in table and 'E2URec' in table
        assert sorted(os.listdir(os.path.join(out, 'seed-0', 'reports'))) == ['e2urec.json', 'neggrad.json',
                                                                             'original.json']
        assert main(['report', '--config', config_path, '--out', out]) == EXIT_OK
        assert 'NegGrad' in capsys.readouterr().out

    def test_seed_override(self, config_path, tmp_path):
        out = str(tmp_path / 'runs')
        assert main(['prepare', '--config', config_path, '--out', out, '--seed', '4']) == EXIT_OK
        assert os.path.isdir(os.path.join(out, 'seed-4', 'bundle'))

    def test_run_before_prepare(self, config_path, tmp_path, capsys):
        assert main(['run', '--config', config_path, '--out', str(tmp_path / 'empty')]) == EXIT_DATA
        assert 'prepare' in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(['prepare', '--config', str(tmp_path / 'absent.yaml')]) == EXIT_CONFIG

    def test_unknown_method(self, config_path, tmp_path):
        assert main(['run', '--config', config_path, '--out', str(tmp_path), '--methods', 'scrub']) == EXIT_CONFIG

    def test_missing_csv(self, tiny_tree, tmp_path):
        tree = dict(tiny_tree, data={'source': 'csv', 'path': str(tmp_path / 'absent.csv')})
        path = tmp_path / 'csv.yaml'
        path.write_text(yaml.safe_dump(tree), encoding='utf-8')
        assert main(['prepare', '--config', str(path), '--out', str(tmp_path / 'runs')]) == EXIT_DATA
