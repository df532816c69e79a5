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

import math

import numpy as np
import pytest

from unlearnrec.exceptions import ReportError, UndefinedMetricError
from unlearnrec.metrics import (LN2, MetricsReport, acc, auc, bernoulli_jsd, evaluate_method, jsd, jsd_on_forgotten,
                                l2_on_forgotten, logloss, time_and_count)
from unlearnrec.tensor import Tensor, kl_divergence


class FixedModel:
    def __init__(self, clicks):
        self.clicks = np.asarray(clicks, dtype=np.float64)

    def predict(self, samples):
        return self.clicks[:len(samples)]

    def predict_distributions(self, samples, space='vocab'):
        p = self.predict(samples)
        return np.stack([p, 1.0 - p], axis=-1)


def report(**overrides):
    values = dict(method='e2urec', seed=0, config_digest='abc', auc=0.7, acc=0.6, logloss=0.5, jsd=0.01, l2norm=0.1,
                  wall_time_seconds=1.5, trainable_params=10, total_params=100)
    values.update(overrides)
    return MetricsReport(**values)


class TestClassificationMetrics:
    def test_auc_perfect_and_inverted(self):
        assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)
        assert auc([0.9, 0.1], [1, 0]) == 1.0
        assert auc([0.1, 0.9], [1, 0]) == 0.0

    def test_auc_ties_count_half(self):
        assert auc([0.5, 0.5, 0.5], [1, 0, 1]) == pytest.approx(0.5)

    def test_auc_hand_case(self):
        assert auc([0.9, 0.8, 0.3, 0.2], [1, 0, 1, 0]) == 0.75

    def test_auc_matches_pair_count(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            size = int(rng.integers(2, 30))
            scores = rng.integers(0, 6, size=size) / 5.0
            labels = rng.integers(0, 2, size=size)
            labels[:2] = [1, 0]
            positives, negatives = scores[labels == 1], scores[labels == 0]
            wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in positives for n in negatives)
            assert auc(scores, labels) == wins / (len(positives) * len(negatives))

    def test_auc_single_class(self):
        with pytest.raises(UndefinedMetricError):
            auc([0.2, 0.3], [1, 1])

    def test_acc_threshold(self):
        assert acc([0.5, 0.49, 0.9], [1, 0, 0]) == pytest.approx(2.0 / 3.0)

    def test_logloss_clips(self):
        assert math.isfinite(logloss([0.0, 1.0], [1, 0]))
        assert logloss([0.5], [1]) == pytest.approx(math.log(2.0))

    def test_length_mismatch(self):
        with pytest.raises(UndefinedMetricError):
            acc([0.5], [1, 0])


class TestDivergences:
    def test_jsd_bounds(self):
        assert jsd([1.0, 0.0], [0.0, 1.0]) == pytest.approx(LN2)
        assert jsd([0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0, abs=1e-15)

    def test_jsd_symmetric(self):
        p, q = np.array([0.2, 0.5, 0.3]), np.array([0.6, 0.1, 0.3])
        assert jsd(p, q) == pytest.approx(jsd(q, p))

    def test_bernoulli_matches_general(self):
        assert bernoulli_jsd(0.2, 0.7) == pytest.approx(jsd([0.2, 0.8], [0.7, 0.3]))

    def test_identities_on_random_distributions(self):
        rng = np.random.default_rng(11)
        p = rng.dirichlet(np.ones(5), size=10000)
        q = rng.dirichlet(np.ones(5), size=10000)
        np.testing.assert_allclose(kl_divergence(p, Tensor(p)).data, 0.0, atol=1e-12)
        assert np.all(kl_divergence(p, Tensor(q)).data >= -1e-12)
        forward, backward = jsd(p, q), jsd(q, p)
        np.testing.assert_array_equal(forward, backward)
        assert np.all((forward >= 0.0) & (forward <= LN2))

    def test_opposite_certain_clicks(self):
        assert bernoulli_jsd(1.0, 0.0) == pytest.approx(LN2, abs=1e-9)

    def test_on_forgotten(self):
        a, b = FixedModel([0.9, 0.2]), FixedModel([0.6, 0.2])
        forgotten = ['s1', 's2']
        assert jsd_on_forgotten(a, b, forgotten) == pytest.approx(bernoulli_jsd(0.9, 0.6) / 2.0)
        assert jsd_on_forgotten(a, b, forgotten, space='vocab') == pytest.approx(bernoulli_jsd(0.9, 0.6) / 2.0)
        assert l2_on_forgotten(a, b, forgotten) == pytest.approx(math.sqrt(2 * 0.3 ** 2) / 2.0)
        assert jsd_on_forgotten(a, a, forgotten) == 0.0

    def test_empty_forgotten(self):
        with pytest.raises(UndefinedMetricError):
            l2_on_forgotten(FixedModel([0.5]), FixedModel([0.5]), [])


class TestEfficiency:
    def test_time_and_count(self):
        class Outcome:
            trainable_params = 42

        elapsed, trainable, outcome = time_and_count(Outcome)
        assert elapsed >= 0.0
        assert trainable == 42
        assert isinstance(outcome, Outcome)

    def test_noop(self):
        assert time_and_count(lambda: None)[1:] == (0, None)


class TestMetricsReport:
    def test_json_round_trip(self):
        original = report()
        assert MetricsReport.from_json(original.to_json()) == original

    def test_without_time(self):
        assert 'wall_time_seconds' not in report().to_dict(include_time=False)

    @pytest.mark.parametrize('overrides', [{'auc': 1.2}, {'jsd': 0.8}, {'l2norm': -0.1}, {'trainable_params': 200},
                                           {'wall_time_seconds': -1.0}])
    def test_validation(self, overrides):
        with pytest.raises(ReportError):
            report(**overrides).validate()

    def test_unknown_field(self):
        data = report().to_dict()
        data['bleu'] = 0.3
        with pytest.raises(ReportError):
            MetricsReport.from_dict(data)

    def test_evaluate_method(self, original, bundle):
        result = evaluate_method('original', original, bundle.test, total_params=10)
        assert result.jsd is None and result.l2norm is None
        assert 0.0 <= result.auc <= 1.0
        scored = evaluate_method('e2urec', original, bundle.test, bundle.forgotten, original, total_params=10)
        assert scored.jsd == pytest.approx(0.0, abs=1e-12)
        assert scored.l2norm == pytest.approx(0.0, abs=1e-12)
