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

import numpy as np

from unlearnrec.exceptions import ConfigError, ContractError


class OptimizerState:
    """
    Adaptive-moment optimizer state.

    Moment accumulators are created lazily, and only for parameters that
    require gradients when a step is taken.

    Args:
        learning_rate (float): Step size, must be positive.
        beta1 (float): First moment decay.
        beta2 (float): Second moment decay.
        epsilon (float): Denominator offset.

    Raises:
        ConfigError: If a hyper-parameter is out of range.
    """

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        if learning_rate <= 0:
            raise ConfigError('Learning rate must be positive, got %r' % learning_rate)
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError('Moment decays must lie in [0, 1)')
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self.first_moment = {}
        self.second_moment = {}

    def __repr__(self):
        return 'OptimizerState(learning_rate=%r, step_count=%d)' % (self.learning_rate, self.step_count)


def optimizer_step(params, state):
    """
    Apply one bias-corrected adaptive-moment update in place.

    Parameters with requires_grad False are skipped and stay bit-identical.
    Moments are keyed by position in params, so the same list must be passed
    on every call.

    Args:
        params (List[Tensor]): Parameters, trainable and frozen.
        state (OptimizerState): State updated in place.

    Raises:
        ContractError: If a trainable parameter has no gradient.
    """
    for index, param in enumerate(params):
        if param.requires_grad and param.grad is None:
            raise ContractError('Trainable parameter %d has no gradient; run backward() first' % index)

    state.step_count += 1
    step = state.step_count
    correction1 = 1.0 - state.beta1 ** step
    correction2 = 1.0 - state.beta2 ** step

    for index, param in enumerate(params):
        if not param.requires_grad:
            continue
        grad = param.grad.astype(param.dtype, copy=False)
        first = state.first_moment.get(index)
        second = state.second_moment.get(index)
        if first is None:
            first = np.zeros_like(param.data)
            second = np.zeros_like(param.data)
        first = state.beta1 * first + (1.0 - state.beta1) * grad
        second = state.beta2 * second + (1.0 - state.beta2) * grad * grad
        state.first_moment[index] = first
        state.second_moment[index] = second
        update = state.learning_rate * (first / correction1) / (np.sqrt(second / correction2) + state.epsilon)
        param.data -= update.astype(param.dtype, copy=False)


class Adam:
    """
    Adaptive-moment optimizer over a fixed parameter list.

    Args:
        params (List[Tensor]): Parameters to optimize; frozen ones are ignored.
        learning_rate (float): Step size.
    """

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self._logger = logging.getLogger(self.__class__.__name__)
        self.params = list(params)
        self.state = OptimizerState(learning_rate=learning_rate, beta1=beta1, beta2=beta2, epsilon=epsilon)

    def step(self):
        optimizer_step(self.params, self.state)

    def zero_grad(self):
        for param in self.params:
            param.grad = None
