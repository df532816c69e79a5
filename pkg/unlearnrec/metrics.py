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
Effectiveness and efficiency metrics.

Every metric returns a raw fraction computed with natural logarithms; percent
scaling happens only when a table is rendered.
"""

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np
from scipy.special import rel_entr
from scipy.stats import rankdata

from unlearnrec.exceptions import ReportError, UndefinedMetricError

LN2 = math.log(2.0)
LOGLOSS_EPS = 1e-7
JSD_SPACES = ('click', 'vocab')

_logger = logging.getLogger(__name__)


def _arrays(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape:
        raise UndefinedMetricError('Got %d scores for %d labels' % (scores.size, labels.size))
    if scores.size == 0:
        raise UndefinedMetricError('Metrics need at least one sample')
    return scores, labels


def auc(scores, labels):
    """
    Area under the ROC curve from the Mann-Whitney rank statistic.

    Tied scores share their average rank, so every tied positive/negative
    pair counts one half.

    Raises:
        UndefinedMetricError: If labels hold a single class.
    """
    scores, labels = _arrays(scores, labels)
    positives = int(labels.sum())
    negatives = labels.size - positives
    if positives == 0 or negatives == 0:
        raise UndefinedMetricError('AUC is undefined when labels hold a single class')
    ranks = rankdata(scores, method='average')
    wins = ranks[labels == 1].sum() - positives * (positives + 1) / 2.0
    return float(wins / (positives * negatives))


def acc(scores, labels, threshold=0.5):
    scores, labels = _arrays(scores, labels)
    return float(np.mean((scores >= threshold).astype(np.int64) == labels))


def logloss(scores, labels):
    scores, labels = _arrays(scores, labels)
    p = np.clip(scores, LOGLOSS_EPS, 1.0 - LOGLOSS_EPS)
    return float(np.mean(-(labels * np.log(p) + (1 - labels) * np.log(1.0 - p))))


def jsd(p, q, axis=-1):
    """Jensen-Shannon divergence between distributions along axis, in nats."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)
    value = 0.5 * rel_entr(p, m).sum(axis=axis) + 0.5 * rel_entr(q, m).sum(axis=axis)
    return np.clip(value, 0.0, LN2)


def bernoulli_jsd(p, q):
    """Element-wise Jensen-Shannon divergence between Bernoulli(p) and Bernoulli(q)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return jsd(np.stack([p, 1.0 - p], axis=-1), np.stack([q, 1.0 - q], axis=-1))


def _check_forgotten(forgotten):
    if not forgotten:
        raise UndefinedMetricError('Forgetting metrics need a non-empty forgotten set')


def jsd_on_forgotten(model_a, model_b, forgotten, space='click'):
    """
    Mean JS divergence between two models' outputs on the forgotten set.

    Args:
        model_a: Anything with predict() and predict_distributions().
        model_b: Reference model, usually the retrained one.
        forgotten (List[RenderedSample]): D_f.
        space (str): 'click' compares Bernoulli click distributions, 'vocab'
            the full answer-position distributions.
    """
    _check_forgotten(forgotten)
    if space == 'click':
        return float(np.mean(bernoulli_jsd(model_a.predict(forgotten), model_b.predict(forgotten))))
    if space == 'vocab':
        return float(np.mean(jsd(model_a.predict_distributions(forgotten), model_b.predict_distributions(forgotten))))
    raise UndefinedMetricError('Unknown JSD space "%s", expected one of %s' % (space, JSD_SPACES))


def l2_on_forgotten(model_a, model_b, forgotten):
    """Mean Euclidean distance between [p, 1 - p] click vectors on the forgotten set."""
    _check_forgotten(forgotten)
    p = model_a.predict(forgotten)
    q = model_b.predict(forgotten)
    diff = np.stack([p - q, (1.0 - p) - (1.0 - q)], axis=-1)
    return float(np.mean(np.linalg.norm(diff, axis=-1)))


def time_and_count(run):
    """
    Time an unlearning call on the monotonic clock.

    Args:
        run (callable): Zero-argument callable returning an outcome with a
            trainable_params attribute, or None for a no-op.

    Returns:
        tuple: (wall_time_seconds, trainable_params, outcome)
    """
    start = time.perf_counter()
    outcome = run()
    elapsed = time.perf_counter() - start
    trainable = 0 if outcome is None else int(outcome.trainable_params)
    return elapsed, trainable, outcome


@dataclass
class MetricsReport:
    """
    Scores of one method under one seed.

    jsd and l2norm are None for rows that have no retrained reference to
    compare with (the original and the retrained model themselves).
    """

    method: str
    seed: int
    config_digest: str
    auc: float
    acc: float
    logloss: float
    jsd: Optional[float]
    l2norm: Optional[float]
    wall_time_seconds: float
    trainable_params: int
    total_params: int
    log_base: str = 'e'
    kl_space: str = 'vocab'
    jsd_space: str = 'click'

    def validate(self):
        """
        Raises:
            ReportError: If a value lies outside its range.
        """
        checks = [
            (0.0 <= self.auc <= 1.0, 'auc'),
            (0.0 <= self.acc <= 1.0, 'acc'),
            (self.logloss >= 0.0, 'logloss'),
            (self.jsd is None or 0.0 <= self.jsd <= LN2, 'jsd'),
            (self.l2norm is None or self.l2norm >= 0.0, 'l2norm'),
            (self.wall_time_seconds >= 0.0, 'wall_time_seconds'),
            (0 <= self.trainable_params <= self.total_params, 'trainable_params'),
        ]
        for ok, name in checks:
            if not ok:
                raise ReportError('Report for "%s" has %s out of range: %r' % (self.method, name, getattr(self, name)))
        return self

    def to_dict(self, include_time=True):
        data = asdict(self)
        if not include_time:
            del data['wall_time_seconds']
        return data

    def to_json(self, include_time=True):
        return json.dumps(self.to_dict(include_time=include_time), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        known = {field.name for field in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ReportError('Unknown report fields %s' % sorted(unknown))
        return cls(**data).validate()

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def evaluate_method(method, model, test, forgotten=None, reference=None, wall_time_seconds=0.0,
                    trainable_params=0, total_params=0, seed=0, config_digest='', kl_space='vocab',
                    jsd_space='click'):
    """
    Score a model on the test set and, given a reference, on the forgotten set.

    Args:
        method (str): Method key.
        model: Model or ensemble with predict().
        test (List[RenderedSample]): Test split shared by every method.
        forgotten (List[RenderedSample]): D_f.
        reference: Retrained model; None leaves jsd and l2norm empty.

    Returns:
        MetricsReport: The validated report.
    """
    scores = model.predict(test)
    labels = [sample.label for sample in test]
    divergence = distance = None
    if reference is not None:
        divergence = jsd_on_forgotten(model, reference, forgotten, space=jsd_space)
        distance = l2_on_forgotten(model, reference, forgotten)
    report = MetricsReport(method=method, seed=seed, config_digest=config_digest, auc=auc(scores, labels),
                           acc=acc(scores, labels), logloss=logloss(scores, labels), jsd=divergence,
                           l2norm=distance, wall_time_seconds=float(wall_time_seconds),
                           trainable_params=int(trainable_params), total_params=int(total_params),
                           kl_space=kl_space, jsd_space=jsd_space)
    _logger.info('Evaluated "%s": auc %.4f, logloss %.4f', method, report.auc, report.logloss)
    return report.validate()
