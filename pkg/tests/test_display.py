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

import pytest

from unlearnrec import __version__
from unlearnrec.display import Display, average_by_method
from unlearnrec.metrics import MetricsReport


def report(method, seed=0, auc=0.7, jsd=0.01, wall_time_seconds=2.0, trainable_params=100):
    return MetricsReport(method=method, seed=seed, config_digest='abc', auc=auc, acc=0.6, logloss=0.5, jsd=jsd,
                         l2norm=None if jsd is None else 0.1, wall_time_seconds=wall_time_seconds,
                         trainable_params=trainable_params, total_params=1000)


@pytest.fixture
def reports():
    return [
        report('original', jsd=None),
        report('retrain', jsd=None, wall_time_seconds=10.0, trainable_params=1000),
        report('e2urec', seed=0, auc=0.7),
        report('e2urec', seed=1, auc=0.8),
    ]


class TestDisplay:
    def test_average_by_method(self, reports):
        rows = average_by_method(reports)
        assert list(rows) == ['original', 'retrain', 'e2urec']
        assert rows['e2urec']['auc'] == pytest.approx(0.75)
        assert rows['e2urec']['seeds'] == 2
        assert rows['original']['jsd'] is None

    def test_comparison_table(self, reports):
        table = Display().comparison_table(reports)
        lines = table.splitlines()
        assert 'Effectiveness (%)' in lines[0] and 'Efficiency' in lines[0]
        assert lines[1].split()[:3] == ['Method', 'AUC', 'ACC']
        e2urec = next(line for line in lines if line.startswith('E2URec'))
        assert '75.00' in e2urec
        assert '0.200' in e2urec
        assert '1.00e+02' in e2urec
        original = next(line for line in lines if line.startswith('Original'))
        assert original.split()[4:6] == ['-', '-']
        assert lines[-2] == 'seeds: 0, 1'
        assert lines[-1] == 'generated by unlearnrec v%s' % __version__

    def test_columns_align(self, reports):
        lines = Display().comparison_table(reports).splitlines()
        body = lines[1:2] + lines[3:6]
        assert len({len(line) for line in body}) == 1

    def test_without_retrain_row(self):
        table = Display().comparison_table([report('neggrad')])
        row = next(line for line in table.splitlines() if line.startswith('NegGrad'))
        assert row.split()[7] == '-'

    def test_ablation_table(self):
        table = Display().ablation_table([report('e2urec'), report('e2urec-no-fgt', auc=0.6),
                                          report('e2urec-no-rem', auc=0.65)])
        assert 'w/o L_FGT' in table and 'w/o L_REM' in table
        assert 'Time' not in table
        assert table.splitlines()[-1].startswith('generated by unlearnrec')
