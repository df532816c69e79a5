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

from collections import OrderedDict

import numpy as np

from unlearnrec import __version__

METHOD_LABELS = {
    'original': 'Original',
    'retrain': 'Retrain',
    'sisa': 'SISA',
    'receraser': 'RecEraser',
    'negkl': 'NegKL',
    'neggrad': 'NegGrad',
    'badt': 'Bad-T',
    'e2urec': 'E2URec',
    'e2urec-no-fgt': 'w/o L_FGT',
    'e2urec-no-rem': 'w/o L_REM',
}

EFFECTIVENESS = (('auc', 'AUC'), ('acc', 'ACC'), ('logloss', 'LL'), ('jsd', 'JSD'), ('l2norm', 'L2-norm'))


def _mean(values):
    values = [value for value in values if value is not None]
    return float(np.mean(values)) if values else None


def average_by_method(reports):
    """
    Average every numeric field over the seeds of each method.

    Returns:
        OrderedDict: method to dict of averaged fields plus 'seeds', in first
            appearance order.
    """
    grouped = OrderedDict()
    for report in reports:
        grouped.setdefault(report.method, []).append(report)
    rows = OrderedDict()
    for method, group in grouped.items():
        row = {name: _mean([getattr(report, name) for report in group]) for name, _ in EFFECTIVENESS}
        row['wall_time_seconds'] = _mean([report.wall_time_seconds for report in group])
        row['trainable_params'] = _mean([report.trainable_params for report in group])
        row['seeds'] = len(group)
        rows[method] = row
    return rows


class Display:
    """Render metrics reports as aligned plain-text tables."""

    def comparison_table(self, reports):
        """
        Effectiveness and efficiency of every method, averaged over seeds.

        Effectiveness values are shown in percent; a dash marks a metric the
        method has no reference for. Time is also shown relative to Retrain
        when a Retrain row exists.

        Args:
            reports (List[MetricsReport]): Reports of one or more seeds.

        Returns:
            str: The table.
        """
        rows = average_by_method(reports)
        retrain = rows.get('retrain', {}).get('wall_time_seconds')

        header = ['Method'] + [label for _, label in EFFECTIVENESS] + ['Time(s)', 'vs Retrain', '#Params']
        body = []
        for method, row in rows.items():
            ratio = None
            if retrain and row['wall_time_seconds'] is not None:
                ratio = row['wall_time_seconds'] / retrain
            body.append([METHOD_LABELS.get(method, method)] +
                        [self._percent(row[name]) for name, _ in EFFECTIVENESS] +
                        ['%.2f' % row['wall_time_seconds'], '-' if ratio is None else '%.3f' % ratio,
                         '%.2e' % row['trainable_params']])

        seeds = sorted({report.seed for report in reports})
        result = self._grid(header, body, groups=[('Effectiveness (%)', 1, 6), ('Efficiency', 6, 9)])
        result += [
            '',
            'seeds: %s' % ', '.join(str(seed) for seed in seeds),
            'generated by unlearnrec v%s' % __version__,
        ]
        return '\n'.join(result)

    def ablation_table(self, reports):
        """
        Effectiveness of the full teacher-student method against its
        single-loss variants, averaged over seeds.
        """
        rows = average_by_method(reports)
        header = ['Variant'] + [label for _, label in EFFECTIVENESS]
        body = [[METHOD_LABELS.get(method, method)] + [self._percent(row[name]) for name, _ in EFFECTIVENESS]
                for method, row in rows.items()]

        result = self._grid(header, body, groups=[('Effectiveness (%)', 1, 6)])
        result += [
            '',
            'generated by unlearnrec v%s' % __version__,
        ]
        return '\n'.join(result)

    def _percent(self, value):
        return '-' if value is None else '%.2f' % (100.0 * value)

    def _grid(self, header, body, groups):
        """
        Lay out header and body as right-aligned columns under group titles.

        Args:
            groups (List[tuple]): (title, first column, end column) spans.

        Returns:
            List[str]: Table lines.
        """
        widths = [max(len(row[column]) for row in [header] + body) for column in range(len(header))]

        def line(cells):
            parts = [cells[0].ljust(widths[0])]
            for column in range(1, len(cells)):
                separator = ' | ' if any(column == start for _, start, _ in groups[1:]) else '  '
                parts.append(separator + cells[column].rjust(widths[column]))
            return ''.join(parts).rstrip()

        span_line = ' ' * widths[0]
        for title, start, end in groups:
            span = sum(widths[start:end]) + 2 * (end - start)
            if start != groups[0][1]:
                span_line += ' |'
                span -= 1
            span_line += title.center(span)
        rule = '-' * len(line(header))

        result = [
            span_line.rstrip(),
            line(header),
            rule,
        ]
        result += [line(row) for row in body]
        return result
