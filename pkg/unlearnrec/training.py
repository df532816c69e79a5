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

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from unlearnrec.events import EventLog
from unlearnrec.exceptions import ConfigError, TrainingError
from unlearnrec.model import init_params, prediction_loss
from unlearnrec.optim import Adam
from unlearnrec.tensor import no_grad

_logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Full-parameter training schedule with early stopping on validation loss."""

    epochs: int = 20
    patience: int = 3
    learning_rate: float = 1e-3
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.patience < 1 or self.batch_size < 1:
            raise ConfigError('epochs must be >= 0, patience and batch_size >= 1')
        if self.learning_rate <= 0:
            raise ConfigError('learning_rate must be positive, got %r' % self.learning_rate)

    def to_dict(self):
        return asdict(self)


def derive_seeds(seed, count):
    """Split one seed into count independent integer seeds."""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]


def iterate_batches(samples, batch_size, rng=None):
    """Yield consecutive batches, shuffled first when rng is given."""
    order = np.arange(len(samples)) if rng is None else rng.permutation(len(samples))
    for start in range(0, len(samples), batch_size):
        yield [samples[index] for index in order[start:start + batch_size]]


def evaluate_loss(params, samples, batch_size=64):
    """Mean answer-token negative log-likelihood over samples, without dropout."""
    if not samples:
        return float('nan')
    total = 0.0
    with no_grad():
        for batch in iterate_batches(samples, batch_size):
            total += float(prediction_loss(params, batch).item()) * len(batch)
    return total / len(samples)


class Trainer:
    """
    Single-writer optimization loop over one model's trainable weights.

    Args:
        params (ModelParams): Model, already in its training mode.
        learning_rate (float): Adam step size.
    """

    def __init__(self, params, learning_rate=1e-3):
        self._logger = logging.getLogger(self.__class__.__name__)
        self.params = params
        self.optimizer = Adam(params.parameters(), learning_rate=learning_rate)
        self.step_index = 0

    def step(self, loss):
        """
        Back-propagate loss and apply one update.

        Returns:
            float: The loss value.

        Raises:
            TrainingError: If the loss is NaN or infinite.
        """
        value = float(loss.item())
        if not math.isfinite(value):
            raise TrainingError('Loss became %r at step %d' % (value, self.step_index))
        loss.backward()
        self.optimizer.step()
        self.optimizer.zero_grad()
        self.step_index += 1
        self._logger.debug('Step %d: loss %.6f', self.step_index, value)
        return value


def train_original(config, train, valid, train_config=None, event_log=None):
    """
    Train a recommender from scratch on every weight.

    Validation loss is measured after each epoch; training stops after
    patience epochs without improvement and the best epoch's weights are
    returned. With zero epochs the initialization is returned.

    Args:
        config (ModelConfig): Model shape.
        train (List[RenderedSample]): Training samples.
        valid (List[RenderedSample]): Validation samples; may be empty, in
            which case the last epoch wins.
        train_config (TrainConfig): Schedule and seed.
        event_log (EventLog): Receives one 'train_epoch' event per epoch.

    Returns:
        ModelParams: Trained model in 'frozen' mode.

    Raises:
        TrainingError: If the loss diverges.
    """
    train_config = train_config or TrainConfig()
    event_log = event_log or EventLog()
    init_seed, stream_seed = derive_seeds(train_config.seed, 2)
    params = init_params(config, seed=init_seed)
    if train_config.epochs == 0 or not train:
        return params.set_mode('frozen')

    rng = np.random.default_rng(stream_seed)
    trainer = Trainer(params, learning_rate=train_config.learning_rate)
    best, best_loss, stale = params.copy(), math.inf, 0

    _logger.info('Training on %d samples for up to %d epochs', len(train), train_config.epochs)
    for epoch in range(1, train_config.epochs + 1):
        losses = [trainer.step(prediction_loss(params, batch, training=True, rng=rng))
                  for batch in iterate_batches(train, train_config.batch_size, rng)]
        valid_loss = evaluate_loss(params, valid) if valid else float(np.mean(losses))
        event_log.record('train_epoch', epoch=epoch, train_loss=float(np.mean(losses)), valid_loss=valid_loss)

        if valid_loss < best_loss:
            best, best_loss, stale = params.copy(), valid_loss, 0
        else:
            stale += 1
            if stale >= train_config.patience:
                _logger.info('Early stop after epoch %d, best validation loss %.6f', epoch, best_loss)
                break

    if not valid:
        best = params.copy()
    return best.set_mode('frozen')
