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

import numpy as np
import pytest

from unlearnrec.exceptions import ConfigError, ContractError
from unlearnrec.optim import Adam, OptimizerState, optimizer_step
from unlearnrec.tensor import Tensor


class TestOptimizer:
    def test_first_step_moves_by_learning_rate(self):
        w = Tensor([1.0, -2.0], requires_grad=True)
        w.grad = np.array([0.5, -3.0])
        optimizer_step([w], OptimizerState(learning_rate=0.01))
        np.testing.assert_allclose(w.data, [0.99, -1.99], atol=1e-8)

    def test_frozen_parameters_are_untouched(self):
        frozen = Tensor([1.0, 2.0])
        trainable = Tensor([3.0], requires_grad=True)
        before = frozen.data.copy()
        optimizer = Adam([frozen, trainable], learning_rate=0.1)
        for _ in range(5):
            (trainable * trainable).sum().backward()
            optimizer.step()
            optimizer.zero_grad()
        assert frozen.data.tobytes() == before.tobytes()
        assert set(optimizer.state.first_moment) == {1}

    def test_minimizes_quadratic(self):
        w = Tensor([5.0, -4.0], requires_grad=True)
        optimizer = Adam([w], learning_rate=0.1)
        for _ in range(500):
            (w * w).sum().backward()
            optimizer.step()
            optimizer.zero_grad()
        assert np.all(np.abs(w.data) < 0.5)

    def test_missing_gradient(self):
        w = Tensor([1.0], requires_grad=True)
        with pytest.raises(ContractError):
            Adam([w]).step()

    @pytest.mark.parametrize('kwargs', [{'learning_rate': 0.0}, {'beta1': 1.0}, {'beta2': -0.1}])
    def test_invalid_hyper_parameters(self, kwargs):
        with pytest.raises(ConfigError):
            OptimizerState(**kwargs)
