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
Unlearning with two teachers.

The student is the original model plus fresh LoRA adapters. On forgotten
samples it is pulled towards a forgetting teacher, whose logits are the
original logits minus alpha times the part where a model fine-tuned on the
forgotten data grew more confident. On retained samples it is anchored to the
original model while still fitting the labels. Only the adapters train.
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit, softmax as np_softmax

from unlearnrec.events import EventLog
from unlearnrec.exceptions import (ConfigError, ContractError, DimensionError, EmptyDatasetError,
                                   ForgottenSetError)
from unlearnrec.metrics import bernoulli_jsd, logloss
from unlearnrec.model import (attach_lora, count_params, forward_batch, predict_clicks, predict_logits,
                              prediction_loss, restrict_logits, trainable_count)
from unlearnrec.prompts import NO_ID, YES_ID
from unlearnrec.tensor import Tensor, cross_entropy_nll, kl_divergence, softmax
from unlearnrec.training import Trainer, derive_seeds, iterate_batches

KL_SPACES = ('vocab', 'answer')
SELECTION_SIZE = 256

_logger = logging.getLogger(__name__)


@dataclass
class UnlearnConfig:
    """
    Settings of the teacher-student unlearning run.

    alpha scales the forgetting teacher, beta weighs forgetting against
    remembering. epochs counts full passes over the forgotten set. With
    select_best, a seeded selection_fraction of the forgotten samples (at
    least one, at most 256) is held out of training and scores each epoch.
    """

    alpha: float = 2.0
    beta: float = 0.6
    epochs: int = 5
    batch_size_forget: int = 16
    batch_size_retain: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    kl_space: str = 'vocab'
    augment_epochs: int = 3
    augment_learning_rate: float = 1e-3
    augment_mode: str = 'full'
    select_best: bool = True
    selection_fraction: float = 0.1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError('alpha must be positive, got %r' % self.alpha)
        _check_beta(self.beta)
        if self.epochs < 0 or self.augment_epochs < 0:
            raise ConfigError('Epoch budgets must be non-negative')
        if self.batch_size_forget < 1 or self.batch_size_retain < 1:
            raise ConfigError('Batch sizes must be positive')
        if self.learning_rate <= 0 or self.augment_learning_rate <= 0:
            raise ConfigError('Learning rates must be positive')
        if self.kl_space not in KL_SPACES:
            raise ConfigError('kl_space must be one of %s, got "%s"' % (KL_SPACES, self.kl_space))
        if self.augment_mode not in ('full', 'lora'):
            raise ConfigError('augment_mode must be full or lora, got "%s"' % self.augment_mode)
        if not 0.0 <= self.selection_fraction < 1.0:
            raise ConfigError('selection_fraction must lie in [0, 1), got %r' % self.selection_fraction)

    def to_dict(self):
        return asdict(self)


def _check_beta(beta):
    if not 0.0 <= beta <= 1.0:
        raise ConfigError('beta must lie in [0, 1], got %r' % beta)


def forgetting_teacher_logits(v, v_aug, alpha):
    """
    Logits of the forgetting teacher, v - alpha * max(v_aug - v, 0).

    Coordinates where the augmented model is no more confident than the
    original are returned unchanged.

    Args:
        v (Tensor|numpy.ndarray): Original model logits.
        v_aug (Tensor|numpy.ndarray): Augmented model logits, same shape.
        alpha (float): Teacher strength, positive.

    Returns:
        Tensor: Teacher logits, a constant.

    Raises:
        DimensionError: If the shapes differ.
        ConfigError: If alpha is not positive.
    """
    v = v.data if isinstance(v, Tensor) else np.asarray(v, dtype=np.float64)
    v_aug = v_aug.data if isinstance(v_aug, Tensor) else np.asarray(v_aug, dtype=np.float64)
    if v.shape != v_aug.shape:
        raise DimensionError('Teacher logits of mismatched shapes %s and %s' % (v.shape, v_aug.shape))
    if not alpha > 0:
        raise ConfigError('alpha must be positive, got %r' % alpha)
    return Tensor(v - alpha * np.maximum(v_aug - v, 0.0))


def finetune_augmented(original, forgotten, epochs=3, learning_rate=1e-3, batch_size=16, seed=0, mode='full'):
    """
    Fine-tune a copy of the original model on the forgotten set.

    Args:
        original (ModelParams): Trained model; never modified.
        forgotten (List[RenderedSample]): D_f.
        epochs (int): Passes over D_f; 0 returns an exact copy.
        mode (str): 'full' trains every weight, 'lora' trains fresh adapters.

    Returns:
        ModelParams: The augmented model in 'frozen' mode.

    Raises:
        ForgottenSetError: If forgotten is empty.
    """
    if not forgotten:
        raise ForgottenSetError('The augmented model needs a non-empty forgotten set')
    init_seed, stream_seed = derive_seeds(seed, 2)
    augmented = original.copy().set_mode('full') if mode == 'full' else attach_lora(original, seed=init_seed)
    rng = np.random.default_rng(stream_seed)
    trainer = Trainer(augmented, learning_rate=learning_rate)

    for epoch in range(1, epochs + 1):
        losses = [trainer.step(prediction_loss(augmented, batch, training=True, rng=rng))
                  for batch in iterate_batches(forgotten, batch_size, rng)]
        _logger.debug('Augmented model epoch %d: loss %.6f', epoch, float(np.mean(losses)))
    return augmented.set_mode('frozen')


class TeacherBundle:
    """
    The two frozen teachers and their cached outputs.

    Args:
        original (ModelParams): Remembering teacher.
        augmented (ModelParams): Original model fine-tuned on D_f.
        alpha (float): Forgetting teacher strength.
        forgotten_user_ids (frozenset): Users whose samples form D_f.
        kl_space (str): 'vocab' compares full answer-position distributions,
            'answer' the ("Yes", "No") pair.

    Raises:
        ConfigError: If alpha is not positive or the configs differ.
        DimensionError: If the base weight shapes differ.
    """

    def __init__(self, original, augmented, alpha=2.0, forgotten_user_ids=(), kl_space='vocab'):
        self._logger = logging.getLogger(self.__class__.__name__)
        if not alpha > 0:
            raise ConfigError('alpha must be positive, got %r' % alpha)
        if kl_space not in KL_SPACES:
            raise ConfigError('kl_space must be one of %s, got "%s"' % (KL_SPACES, kl_space))
        if original.config != augmented.config:
            raise ConfigError('Teachers must share one model config')
        for name, tensor in original.base.items():
            if augmented.base[name].shape != tensor.shape:
                raise DimensionError('Teacher weight "%s" shapes differ' % name)
        self.original = original
        self.augmented = augmented
        self.alpha = alpha
        self.forgotten_user_ids = frozenset(forgotten_user_ids)
        self.kl_space = kl_space
        self._original_logits = {}
        self._teacher_logits = {}

    @classmethod
    def build(cls, original, forgotten, forgotten_user_ids, config=None):
        """Fine-tune the augmented model and bundle it with the original."""
        config = config or UnlearnConfig()
        augmented = finetune_augmented(original, forgotten, epochs=config.augment_epochs,
                                       learning_rate=config.augment_learning_rate,
                                       batch_size=config.batch_size_forget, seed=config.seed,
                                       mode=config.augment_mode)
        return cls(original, augmented, alpha=config.alpha, forgotten_user_ids=forgotten_user_ids,
                   kl_space=config.kl_space)

    def precompute(self, forgotten, retained):
        """Fill the caches; teachers are frozen, so each sample is scored once."""
        self._cache_original(list(forgotten) + list(retained))
        self._cache_teacher(forgotten)

    def _cache_original(self, samples):
        missing = [sample for sample in dict.fromkeys(samples) if sample not in self._original_logits]
        if missing:
            for sample, logits in zip(missing, predict_logits(self.original, missing)):
                self._original_logits[sample] = logits

    def _cache_teacher(self, samples):
        missing = [sample for sample in dict.fromkeys(samples) if sample not in self._teacher_logits]
        if missing:
            self._cache_original(missing)
            v_aug = predict_logits(self.augmented, missing)
            for sample, aug in zip(missing, v_aug):
                self._teacher_logits[sample] = forgetting_teacher_logits(self._original_logits[sample], aug,
                                                                         self.alpha).data

    def original_logits(self, batch):
        self._cache_original(batch)
        return np.stack([self._original_logits[sample] for sample in batch])

    def teacher_logits(self, batch):
        self._cache_teacher(batch)
        return np.stack([self._teacher_logits[sample] for sample in batch])

    def remembering_targets(self, batch):
        return np_softmax(restrict_logits(self.original_logits(batch), self.kl_space), axis=-1)

    def forgetting_targets(self, batch):
        return np_softmax(restrict_logits(self.teacher_logits(batch), self.kl_space), axis=-1)

    def forgetting_clicks(self, batch):
        logits = self.teacher_logits(batch)
        return expit(logits[:, YES_ID] - logits[:, NO_ID])


def _student_distribution(logits, space):
    return softmax(restrict_logits(logits, space), axis=-1)


def forgetting_loss(student, teachers, batch, training=False, rng=None):
    """
    Mean KL(forgetting teacher || student) over a forgotten-set batch.

    Raises:
        ContractError: If the batch holds a retained user's sample.
    """
    if any(sample.user_id not in teachers.forgotten_user_ids for sample in batch):
        raise ContractError('Forgetting loss received a retained sample')
    logits = forward_batch(student, [sample.token_ids for sample in batch], training=training, rng=rng)
    q = _student_distribution(logits, teachers.kl_space)
    return kl_divergence(teachers.forgetting_targets(batch), q).mean()


def remembering_loss(student, teachers, batch, training=False, rng=None):
    """
    Answer-token loss plus mean KL(original || student) over a retained batch.

    Raises:
        ContractError: If the batch holds a forgotten user's sample.
    """
    if any(sample.user_id in teachers.forgotten_user_ids for sample in batch):
        raise ContractError('Remembering loss received a forgotten sample')
    logits = forward_batch(student, [sample.token_ids for sample in batch], training=training, rng=rng)
    targets = np.array([sample.answer_token_id for sample in batch], dtype=np.intp)
    prediction = cross_entropy_nll(logits, targets).mean()
    q = _student_distribution(logits, teachers.kl_space)
    return prediction + kl_divergence(teachers.remembering_targets(batch), q).mean()


def combined_loss(l_fgt, l_rem, beta):
    """beta * l_fgt + (1 - beta) * l_rem."""
    _check_beta(beta)
    return l_fgt * beta + l_rem * (1.0 - beta)


def _cycle(samples, batch_size, rng):
    while True:
        for batch in iterate_batches(samples, batch_size, rng):
            yield batch


def selection_split(forgotten, fraction=0.1, seed=0):
    """
    Hold a seeded slice of the forgotten set out of training for epoch selection.

    Returns:
        tuple: (training samples, held-out samples). Nothing is held out when
            fraction is 0 or fewer than two samples exist.
    """
    count = min(SELECTION_SIZE, int(round(fraction * len(forgotten))))
    if fraction > 0 and len(forgotten) > 1:
        count = max(count, 1)
    if count == 0:
        return list(forgotten), []
    held = set(np.random.default_rng(seed).permutation(len(forgotten))[:count].tolist())
    training = [sample for index, sample in enumerate(forgotten) if index not in held]
    held_out = [sample for index, sample in enumerate(forgotten) if index in held]
    return training, held_out


def _selection_score(student, teachers, held_out, valid):
    """Distance to the forgetting teacher on held-out forgotten samples plus validation logloss."""
    score = 0.0
    if held_out:
        score += float(np.mean(bernoulli_jsd(predict_clicks(student, held_out), teachers.forgetting_clicks(held_out))))
    if valid:
        score += logloss(predict_clicks(student, valid), [sample.label for sample in valid])
    return score


def unlearn_with_teachers(original, forgotten, retained, config=None, teachers=None, valid=None,
                          event_log=None):
    """
    Unlearn the forgotten set by training LoRA adapters against two teachers.

    One epoch is a full pass over shuffled D_f batches, each paired with the
    next D_r batch from a reshuffling stream. Every step back-propagates
    beta * forgetting loss + (1 - beta) * remembering loss into the adapters
    only. With select_best, the epoch with the lowest selection score is
    returned: the JS divergence between the student's and the forgetting
    teacher's click probabilities on the held-out forgotten slice (see
    selection_split) plus the validation logloss. Held-out samples never
    enter a training batch.

    Args:
        original (ModelParams): Trained base model; never modified.
        forgotten (List[RenderedSample]): D_f.
        retained (List[RenderedSample]): D_r.
        config (UnlearnConfig): Settings.
        teachers (TeacherBundle): Prebuilt teachers, built from config
            otherwise.
        valid (List[RenderedSample]): Validation split used for selection.
        event_log (EventLog): Receives one 'unlearn_epoch' event per epoch.

    Returns:
        ModelParams: Unlearned model (original base plus trained adapters)
            in 'frozen' mode.

    Raises:
        ForgottenSetError: If forgotten is empty.
        EmptyDatasetError: If retained is empty.
        ContractError: If the base weights change or anything besides the
            adapters trains.
        TrainingError: If the loss diverges.
    """
    config = config or UnlearnConfig()
    event_log = event_log or EventLog()
    if not forgotten:
        raise ForgottenSetError('Nothing to unlearn: the forgotten set is empty')
    if not retained:
        raise EmptyDatasetError('Unlearning needs retained samples to remember')
    forgotten_user_ids = frozenset(sample.user_id for sample in forgotten)
    if teachers is None:
        teachers = TeacherBundle.build(original, forgotten, forgotten_user_ids, config)
    teachers.precompute(forgotten, retained)

    lora_seed, stream_seed, split_seed = derive_seeds(config.seed, 3)
    student = attach_lora(original, seed=lora_seed)
    phi_hash = student.base_hash()
    expected = trainable_count(student, 'lora')
    if config.epochs == 0:
        return student.set_mode('frozen')

    training, held_out = forgotten, []
    if config.select_best:
        training, held_out = selection_split(forgotten, config.selection_fraction, split_seed)
    rng = np.random.default_rng(stream_seed)
    retain_stream = _cycle(retained, config.batch_size_retain, rng)
    trainer = Trainer(student, learning_rate=config.learning_rate)
    best, best_score = None, np.inf

    _logger.info('Unlearning %d forgotten samples (%d held out) against %d retained for %d epochs',
                 len(training), len(held_out), len(retained), config.epochs)
    for epoch in range(1, config.epochs + 1):
        totals = np.zeros(3)
        steps = 0
        for forget_batch in iterate_batches(training, config.batch_size_forget, rng):
            if count_params(student)[1] != expected:
                raise ContractError('Only the adapters may train during unlearning')
            l_fgt = forgetting_loss(student, teachers, forget_batch, training=True, rng=rng)
            l_rem = remembering_loss(student, teachers, next(retain_stream), training=True, rng=rng)
            combined = combined_loss(l_fgt, l_rem, config.beta)
            totals += [float(l_fgt.item()), float(l_rem.item()), trainer.step(combined)]
            steps += 1

        current_hash = student.base_hash()
        if current_hash != phi_hash:
            raise ContractError('Base weights changed during unlearning')
        l_fgt, l_rem, combined = totals / steps
        event_log.record('unlearn_epoch', epoch=epoch, l_fgt=l_fgt, l_rem=l_rem, combined=combined,
                         phi_hash=current_hash)

        if config.select_best:
            score = _selection_score(student, teachers, held_out, valid)
            if score < best_score:
                best, best_score = student.copy(), score
                _logger.debug('Epoch %d is the best so far (score %.6f)', epoch, score)

    result = best if best is not None else student
    return result.set_mode('frozen')
