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
Sharded training and exact unlearning.

Users are assigned to disjoint shards, one model is trained per shard and the
ensemble averages their click probabilities. Forgetting a user retrains only
the shards that held that user's samples.
"""

import logging
import math
from dataclasses import replace

import numpy as np

from unlearnrec.exceptions import ConfigError
from unlearnrec.model import count_params, predict_clicks, predict_distributions
from unlearnrec.training import TrainConfig, train_original

STRATEGIES = ('random', 'balanced-similarity')

_logger = logging.getLogger(__name__)


class ShardPlan:
    """
    Assignment of every training user to one shard.

    Args:
        n_shards (int): Number of shards.
        assignment (dict): user_id to shard index.
        strategy (str): 'random' or 'balanced-similarity'.
    """

    def __init__(self, n_shards, assignment, strategy='random'):
        if n_shards < 1:
            raise ConfigError('n_shards must be positive, got %d' % n_shards)
        if strategy not in STRATEGIES:
            raise ConfigError('Unknown sharding strategy "%s"' % strategy)
        if any(not 0 <= shard < n_shards for shard in assignment.values()):
            raise ConfigError('Shard index out of range [0, %d)' % n_shards)
        self.n_shards = n_shards
        self.assignment = dict(assignment)
        self.strategy = strategy

    def users(self, shard):
        return sorted(user for user, index in self.assignment.items() if index == shard)

    def sizes(self):
        return [len(self.users(shard)) for shard in range(self.n_shards)]

    def __repr__(self):
        return 'ShardPlan(n_shards=%d, strategy=%s, sizes=%s)' % (self.n_shards, self.strategy, self.sizes())


def _users_of(train):
    users = sorted({sample.user_id for sample in train})
    if not users:
        raise ConfigError('Cannot shard an empty training set')
    return users


def random_plan(train, n_shards=4, seed=0):
    """Deal users into shards round-robin after a seeded shuffle."""
    users = _users_of(train)
    order = np.random.default_rng(seed).permutation(len(users))
    return ShardPlan(n_shards, {users[index]: position % n_shards for position, index in enumerate(order)}, 'random')


def _incidence(train, users):
    items = sorted({sample.item_id for sample in train})
    user_index = {user: row for row, user in enumerate(users)}
    item_index = {item: column for column, item in enumerate(items)}
    matrix = np.zeros((len(users), len(items)))
    for sample in train:
        matrix[user_index[sample.user_id], item_index[sample.item_id]] = 1.0
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return matrix / np.where(norms > 0, norms, 1.0)


def _balanced_assign(distances, capacity):
    """Greedy assignment of the closest (user, shard) pairs under a shard capacity."""
    n_users, n_shards = distances.shape
    assignment = np.full(n_users, -1)
    load = np.zeros(n_shards, dtype=int)
    for flat in np.argsort(distances, axis=None, kind='stable'):
        user, shard = divmod(int(flat), n_shards)
        if assignment[user] < 0 and load[shard] < capacity:
            assignment[user] = shard
            load[shard] += 1
    return assignment


def receraser_plan(train, n_shards=4, seed=0, iterations=20):
    """
    Group users with overlapping item sets into balanced shards.

    Users are rows of an L2-normalized user-item incidence matrix. Centroids
    start from a seeded farthest-point pass, then balanced k-means alternates
    a greedy capacity-limited assignment (at most ceil(users / n_shards) per
    shard) with centroid updates until the assignment stops changing.

    The cap favours balance over similarity: a group of similar users larger
    than the cap is split across shards.

    Raises:
        ConfigError: If there are fewer users than shards.
    """
    users = _users_of(train)
    if len(users) < n_shards:
        raise ConfigError('Cannot split %d users into %d shards' % (len(users), n_shards))
    if n_shards == 1:
        return ShardPlan(1, {user: 0 for user in users}, 'balanced-similarity')

    vectors = _incidence(train, users)
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(len(users)))]
    closest = np.linalg.norm(vectors - vectors[chosen[0]], axis=1)
    while len(chosen) < n_shards:
        chosen.append(int(np.argmax(closest)))
        closest = np.minimum(closest, np.linalg.norm(vectors - vectors[chosen[-1]], axis=1))
    centroids = vectors[chosen].copy()

    capacity = int(math.ceil(len(users) / n_shards))
    assignment = None
    for _ in range(iterations):
        distances = ((vectors[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=-1)
        updated = _balanced_assign(distances, capacity)
        if assignment is not None and np.array_equal(updated, assignment):
            break
        assignment = updated
        for shard in range(n_shards):
            members = vectors[assignment == shard]
            if len(members):
                centroids[shard] = members.mean(axis=0)

    return ShardPlan(n_shards, {user: int(assignment[row]) for row, user in enumerate(users)},
                     'balanced-similarity')


def shard_seed(seed, shard):
    """Training seed of one shard, independent of every other shard's."""
    return int(np.random.SeedSequence([seed, shard]).generate_state(1)[0])


class ShardEnsemble:
    """
    Per-shard models whose click probabilities are averaged.

    Args:
        models (dict): Shard index to ModelParams.
        plan (ShardPlan): User assignment.
        shard_data (dict): Shard index to its training samples.
        model_config (ModelConfig): Shape shared by every shard model.
        train_config (TrainConfig): Schedule; each shard uses shard_seed().
        valid (List[RenderedSample]): Validation split for early stopping.
    """

    def __init__(self, models, plan, shard_data, model_config, train_config, valid=()):
        self._logger = logging.getLogger(self.__class__.__name__)
        self.models = dict(models)
        self.plan = plan
        self.shard_data = dict(shard_data)
        self.model_config = model_config
        self.train_config = train_config
        self.valid = list(valid)
        self.retrained = []

    def _stacked(self, values):
        # Sorting across shards makes the mean independent of shard order.
        return np.sort(np.stack(values), axis=0).mean(axis=0)

    def predict(self, samples, batch_size=64):
        return self._stacked([predict_clicks(self.models[shard], samples, batch_size=batch_size)
                              for shard in sorted(self.models)])

    def predict_distributions(self, samples, space='vocab', batch_size=64):
        return self._stacked([predict_distributions(self.models[shard], samples, space=space, batch_size=batch_size)
                              for shard in sorted(self.models)])

    def total_params(self):
        return sum(count_params(model)[0] for model in self.models.values())

    def state_hashes(self):
        return {shard: model.state_hash() for shard, model in self.models.items()}

    def __repr__(self):
        return 'ShardEnsemble(shards=%s, strategy=%s)' % (sorted(self.models), self.plan.strategy)


def _train_shard(model_config, samples, valid, train_config, shard):
    config = replace(train_config, seed=shard_seed(train_config.seed, shard))
    return train_original(model_config, samples, valid, config)


def sisa_train(model_config, train, plan, train_config=None, valid=()):
    """
    Train one model per shard on its users' samples.

    Raises:
        ConfigError: If a training user has no shard.
    """
    train_config = train_config or TrainConfig()
    missing = {sample.user_id for sample in train} - set(plan.assignment)
    if missing:
        raise ConfigError('Shard plan does not cover users %s' % sorted(missing)[:5])

    shard_data = {shard: [] for shard in range(plan.n_shards)}
    for sample in train:
        shard_data[plan.assignment[sample.user_id]].append(sample)

    models = {}
    for shard, samples in shard_data.items():
        if not samples:
            _logger.warning('Shard %d holds no samples and is left out of the ensemble', shard)
            continue
        _logger.info('Training shard %d on %d samples', shard, len(samples))
        models[shard] = _train_shard(model_config, samples, valid, train_config, shard)
    shard_data = {shard: samples for shard, samples in shard_data.items() if shard in models}
    return ShardEnsemble(models, plan, shard_data, model_config, train_config, valid)


def sisa_unlearn(ensemble, forgotten):
    """
    Drop the forgotten samples and retrain only the shards that held them.

    Each retrained shard reuses its original seed, so it is bit-identical to
    a shard trained from scratch on the reduced data. A shard left empty is
    removed from the ensemble with a warning.

    Returns:
        ShardEnsemble: New ensemble; untouched shards share their models with
            the input ensemble. retrained lists the retrained shard indices.
    """
    removed = set(forgotten)
    models = dict(ensemble.models)
    shard_data = dict(ensemble.shard_data)
    retrained = []
    for shard in sorted(shard_data):
        samples = shard_data[shard]
        remaining = [sample for sample in samples if sample not in removed]
        if len(remaining) == len(samples):
            continue
        if not remaining:
            _logger.warning('Shard %d is empty after unlearning and is removed from the ensemble', shard)
            del models[shard]
            del shard_data[shard]
            continue
        _logger.info('Retraining shard %d on %d remaining samples', shard, len(remaining))
        models[shard] = _train_shard(ensemble.model_config, remaining, ensemble.valid, ensemble.train_config, shard)
        shard_data[shard] = remaining
        retrained.append(shard)

    result = ShardEnsemble(models, ensemble.plan, shard_data, ensemble.model_config, ensemble.train_config,
                           ensemble.valid)
    result.retrained = retrained
    return result
