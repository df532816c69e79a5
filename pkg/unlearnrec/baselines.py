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
Reference unlearning methods and the method registry.

Every method is a class registered under a string key. prepare() does work
that is not billed as unlearning time (training the initial shard models);
run() performs the unlearning and returns an UnlearnOutcome.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Optional

import numpy as np
from scipy.special import softmax as np_softmax

from unlearnrec.events import EventLog
from unlearnrec.exceptions import ConfigError
from unlearnrec.model import count_params, forward_batch, predict_logits, prediction_loss, trainable_count
from unlearnrec.prompts import NO_ID, YES_ID
from unlearnrec.sharding import random_plan, receraser_plan, sisa_train, sisa_unlearn
from unlearnrec.tensor import kl_divergence, softmax
from unlearnrec.training import TrainConfig, Trainer, derive_seeds, iterate_batches, train_original
from unlearnrec.unlearning import UnlearnConfig, unlearn_with_teachers

METHODS = {}

_logger = logging.getLogger(__name__)


@dataclass
class FinetuneConfig:
    """
    Schedule of the fine-tuning baselines.

    One epoch is a full pass over shuffled retained batches, each paired with
    the next forgotten batch from a reshuffling stream. Negated terms are
    floored at loss_floor.
    """

    epochs: int = 3
    learning_rate: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    loss_floor: float = -10.0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError('epochs must be >= 0 and batch_size >= 1')
        if self.learning_rate <= 0:
            raise ConfigError('learning_rate must be positive, got %r' % self.learning_rate)
        if self.loss_floor >= 0:
            raise ConfigError('loss_floor must be negative, got %r' % self.loss_floor)

    def to_dict(self):
        return asdict(self)


def retrain_from_scratch(model_config, retained, valid, train_config=None, event_log=None):
    """Train a fresh model on the retained data only, exactly like the original."""
    return train_original(model_config, retained, valid, train_config, event_log=event_log)


def _stream(samples, batch_size, rng):
    while True:
        for batch in iterate_batches(samples, batch_size, rng):
            yield batch


def _finetune(original, forgotten, retained, config, loss_fn, relabel=None):
    """
    Full-parameter fine-tuning loop shared by the negated-objective baselines.

    Args:
        loss_fn (callable): (params, retain_batch, forget_batch, rng) to loss;
            forget_batch is None when forgotten is empty.
        relabel (callable): Optional (forgotten, epoch) to the forgotten
            samples used during that epoch.
    """
    params = original.copy().set_mode('full')
    if config.epochs == 0 or not (forgotten or retained):
        return params.set_mode('frozen')

    rng = np.random.default_rng(derive_seeds(config.seed, 1)[0])
    trainer = Trainer(params, learning_rate=config.learning_rate)

    for epoch in range(1, config.epochs + 1):
        epoch_forgotten = relabel(forgotten, epoch) if relabel and forgotten else forgotten
        if retained:
            stream = _stream(epoch_forgotten, config.batch_size, rng) if epoch_forgotten else None
            pairs = [(batch, next(stream) if stream else None)
                     for batch in iterate_batches(retained, config.batch_size, rng)]
        else:
            pairs = [(None, batch) for batch in iterate_batches(epoch_forgotten, config.batch_size, rng)]
        losses = [trainer.step(loss_fn(params, retain_batch, forget_batch, rng))
                  for retain_batch, forget_batch in pairs]
        _logger.debug('Fine-tuning epoch %d: loss %.6f', epoch, float(np.mean(losses)))
    return params.set_mode('frozen')


def _add(retain_term, forget_term):
    if retain_term is None:
        return forget_term
    if forget_term is None:
        return retain_term
    return retain_term + forget_term


def neggrad_loss(params, retain_batch, forget_batch, floor=-10.0, rng=None):
    """Answer loss on retained samples minus answer loss on forgotten ones, floored."""
    training = rng is not None
    retain_term = prediction_loss(params, retain_batch, training, rng) if retain_batch else None
    forget_term = None
    if forget_batch:
        forget_term = (-prediction_loss(params, forget_batch, training, rng)).clamp_min(floor)
    return _add(retain_term, forget_term)


def neggrad_unlearn(original, forgotten, retained, config=None):
    """Gradient ascent on the forgotten set while descending on the retained set."""
    config = config or FinetuneConfig()
    return _finetune(original, forgotten, retained, config,
                     lambda params, r, f, rng: neggrad_loss(params, r, f, config.loss_floor, rng))


def _divergence_from(params, original, batch, rng):
    targets = np_softmax(predict_logits(original, batch), axis=-1)
    logits = forward_batch(params, [sample.token_ids for sample in batch], training=rng is not None, rng=rng)
    return kl_divergence(targets, softmax(logits, axis=-1)).mean()


def negkl_loss(params, original, retain_batch, forget_batch, floor=-10.0, rng=None):
    """
    KL(original || model) on retained samples minus the same on forgotten
    samples, the negated term floored at floor.
    """
    retain_term = _divergence_from(params, original, retain_batch, rng) if retain_batch else None
    forget_term = None
    if forget_batch:
        forget_term = (-_divergence_from(params, original, forget_batch, rng)).clamp_min(floor)
    return _add(retain_term, forget_term)


def negkl_unlearn(original, forgotten, retained, config=None):
    """Push the model away from the original on forgotten samples, towards it elsewhere."""
    config = config or FinetuneConfig()
    return _finetune(original, forgotten, retained, config,
                     lambda params, r, f, rng: negkl_loss(params, original, r, f, config.loss_floor, rng))


def random_answers(forgotten, rng):
    """Copies of the forgotten samples with "Yes"/"No" answers drawn uniformly."""
    answers = rng.integers(0, 2, size=len(forgotten))
    return [replace(sample, answer_token_id=YES_ID if answer else NO_ID, label=int(answer))
            for sample, answer in zip(forgotten, answers)]


def badt_unlearn(original, forgotten, retained, config=None, seed=None):
    """
    Fine-tune on the retained data plus the forgotten data with random answers.

    Answers are redrawn for every sample at the start of every epoch from a
    stream seeded by seed (config.seed when None).
    """
    config = config or FinetuneConfig()
    label_rng = np.random.default_rng(derive_seeds(config.seed if seed is None else seed, 2)[1])

    def loss_fn(params, retain_batch, forget_batch, rng):
        retain_term = prediction_loss(params, retain_batch, True, rng) if retain_batch else None
        forget_term = prediction_loss(params, forget_batch, True, rng) if forget_batch else None
        return _add(retain_term, forget_term)

    return _finetune(original, forgotten, retained, config, loss_fn,
                     relabel=lambda samples, epoch: random_answers(samples, label_rng))


@dataclass
class UnlearnOutcome:
    """An unlearned model plus the parameter counts billed to the method."""

    model: Any
    trainable_params: int
    total_params: int


@dataclass
class MethodContext:
    """Everything a registered method may read."""

    original: Any
    bundle: Any
    model_config: Any
    train_config: TrainConfig = field(default_factory=TrainConfig)
    unlearn_config: UnlearnConfig = field(default_factory=UnlearnConfig)
    finetune_config: FinetuneConfig = field(default_factory=FinetuneConfig)
    n_shards: int = 4
    seed: int = 0
    reference: Optional[Callable] = None
    event_log: EventLog = field(default_factory=EventLog)


def register_method(key):
    """Class decorator that makes a method selectable by key."""
    def decorator(cls):
        cls.key = key
        METHODS[key] = cls
        return cls
    return decorator


def get_method(key):
    """
    Raises:
        ConfigError: If key is not registered; the message lists the keys.
    """
    try:
        return METHODS[key]
    except KeyError:
        raise ConfigError('Unknown method "%s", registered methods: %s' % (key, ', '.join(sorted(METHODS)))) from None


class UnlearningMethod:
    """
    Base class of registered methods.

    Args:
        context (MethodContext): Inputs shared by every method.
    """

    key = None

    def __init__(self, context):
        self._logger = logging.getLogger(self.__class__.__name__)
        self.context = context

    def prepare(self):
        pass

    def run(self):
        raise NotImplementedError

    def _full_outcome(self, model):
        return UnlearnOutcome(model, trainable_count(model, 'full'), count_params(model)[0])


@register_method('retrain')
class Retrain(UnlearningMethod):
    """Gold standard: the retained-only model, trained once and cached by the runner."""

    def run(self):
        context = self.context
        if context.reference is not None:
            model = context.reference()
        else:
            model = retrain_from_scratch(context.model_config, context.bundle.retained, context.bundle.valid,
                                         context.train_config, context.event_log)
        return self._full_outcome(model)


class _ShardMethod(UnlearningMethod):

    def _plan(self):
        raise NotImplementedError

    def prepare(self):
        context = self.context
        self.ensemble = sisa_train(context.model_config, context.bundle.train, self._plan(), context.train_config,
                                   context.bundle.valid)

    def run(self):
        ensemble = sisa_unlearn(self.ensemble, self.context.bundle.forgotten)
        self._logger.info('Retrained shards %s', ensemble.retrained)
        total = ensemble.total_params()
        return UnlearnOutcome(ensemble, total, total)


@register_method('sisa')
class Sisa(_ShardMethod):

    def _plan(self):
        return random_plan(self.context.bundle.train, self.context.n_shards, seed=self.context.seed)


@register_method('receraser')
class RecEraser(_ShardMethod):

    def _plan(self):
        return receraser_plan(self.context.bundle.train, self.context.n_shards, seed=self.context.seed)


@register_method('negkl')
class NegKL(UnlearningMethod):

    def run(self):
        bundle = self.context.bundle
        return self._full_outcome(negkl_unlearn(self.context.original, bundle.forgotten, bundle.retained,
                                                self.context.finetune_config))


@register_method('neggrad')
class NegGrad(UnlearningMethod):

    def run(self):
        bundle = self.context.bundle
        return self._full_outcome(neggrad_unlearn(self.context.original, bundle.forgotten, bundle.retained,
                                                  self.context.finetune_config))


@register_method('badt')
class BadTeacher(UnlearningMethod):

    def run(self):
        bundle = self.context.bundle
        return self._full_outcome(badt_unlearn(self.context.original, bundle.forgotten, bundle.retained,
                                               self.context.finetune_config, seed=self.context.seed))


@register_method('e2urec')
class TeacherUnlearning(UnlearningMethod):
    """LoRA student trained against the forgetting and remembering teachers."""

    def run(self):
        context = self.context
        bundle = context.bundle
        model = unlearn_with_teachers(context.original, bundle.forgotten, bundle.retained, context.unlearn_config,
                                      valid=bundle.valid, event_log=context.event_log)
        return UnlearnOutcome(model, trainable_count(model, 'lora'), count_params(model)[0])
