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

from unlearnrec.exceptions import ContractError, DimensionError, NumericError, TargetIndexError
from unlearnrec.tensor import (Tensor, cross_entropy_nll, dropout, is_grad_enabled, kl_divergence, layer_norm,
                               log_softmax, matmul, no_grad, numerical_grad, softmax)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def check_grad(fn, tensor):
    loss = fn()
    loss.backward()
    np.testing.assert_allclose(tensor.grad, numerical_grad(fn, tensor), rtol=1e-5, atol=1e-7)


class TestGradients:
    def test_matmul(self, rng):
        w = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        x = Tensor(rng.normal(size=(2, 3)))
        check_grad(lambda: (matmul(x, w) ** 2).sum(), w)

    def test_batched_matmul_broadcasts(self, rng):
        w = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
        x = Tensor(rng.normal(size=(5, 3, 4)))
        check_grad(lambda: (x @ w).relu().sum(), w)
        assert w.grad.shape == (4, 2)

    def test_softmax(self, rng):
        v = Tensor(rng.normal(size=(2, 5)), requires_grad=True)
        weights = rng.normal(size=(2, 5))
        check_grad(lambda: (softmax(v) * weights).sum(), v)

    def test_log_softmax(self, rng):
        v = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        weights = rng.normal(size=(3, 4))
        check_grad(lambda: (log_softmax(v) * weights).sum(), v)

    def test_layer_norm(self, rng):
        x = Tensor(rng.normal(size=(2, 6)), requires_grad=True)
        gamma = Tensor(rng.normal(size=6), requires_grad=True)
        beta = Tensor(np.zeros(6))
        weights = rng.normal(size=(2, 6))
        check_grad(lambda: (layer_norm(x, gamma, beta) * weights).sum(), x)
        gamma.grad = None
        check_grad(lambda: (layer_norm(x, gamma, beta) * weights).sum(), gamma)

    def test_kl_divergence_flows_into_q_only(self, rng):
        p = softmax(Tensor(rng.normal(size=(2, 4)))).data
        v = Tensor(rng.normal(size=(2, 4)), requires_grad=True)
        check_grad(lambda: kl_divergence(p, softmax(v)).sum(), v)

    def test_cross_entropy(self, rng):
        logits = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
        targets = np.array([0, 4, 2])
        check_grad(lambda: cross_entropy_nll(logits, targets).mean(), logits)

    def test_indexing_accumulates_repeated_rows(self):
        table = Tensor(np.ones((3, 2)), requires_grad=True)
        table[np.array([0, 0, 2])].sum().backward()
        np.testing.assert_array_equal(table.grad, [[2, 2], [0, 0], [1, 1]])

    def test_clamp_min_blocks_clipped_gradient(self):
        x = Tensor([-20.0, 1.0], requires_grad=True)
        x.clamp_min(-10.0).sum().backward()
        np.testing.assert_array_equal(x.grad, [0.0, 1.0])


class TestTensor:
    def test_backward_requires_grad(self):
        with pytest.raises(ContractError):
            Tensor([1.0]).sum().backward()

    def test_backward_needs_seed_for_vectors(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ContractError):
            (x * 2.0).backward()

    def test_float32_is_kept(self):
        x = Tensor(np.ones(3, dtype=np.float32))
        assert (x * 2.0 + 1.0).dtype == np.float32

    def test_integers_become_float64(self):
        assert Tensor([1, 2]).dtype == np.float64

    def test_matmul_shape_mismatch(self):
        with pytest.raises(DimensionError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_no_grad_stops_recording(self):
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            assert not is_grad_enabled()
            y = x * 3.0
        assert is_grad_enabled()
        assert not y.requires_grad

    def test_gradients_reach_shared_leaf_twice(self):
        x = Tensor([3.0], requires_grad=True)
        (x * x + x).sum().backward()
        np.testing.assert_allclose(x.grad, [7.0])


class TestSoftmax:
    def test_shift_invariance(self):
        v = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(softmax(v).data, softmax(v + 1000.0).data)

    def test_sums_to_one(self, rng):
        np.testing.assert_allclose(softmax(rng.normal(size=(4, 7))).data.sum(axis=-1), np.ones(4))

    def test_rejects_nan(self):
        with pytest.raises(NumericError):
            softmax(np.array([1.0, np.nan]))

    def test_log_softmax_matches_log_of_softmax(self, rng):
        v = rng.normal(size=6)
        np.testing.assert_allclose(log_softmax(v).data, np.log(softmax(v).data))


class TestKLDivergence:
    def test_zero_for_identical_distributions(self):
        p = np.array([0.2, 0.3, 0.5])
        assert kl_divergence(p, Tensor(p)).item() == pytest.approx(0.0, abs=1e-12)

    def test_zero_target_terms_vanish(self):
        p = np.array([0.0, 1.0])
        q = Tensor([0.5, 0.5])
        assert kl_divergence(p, q).item() == pytest.approx(np.log(2.0))

    def test_floor_keeps_result_finite(self):
        value = kl_divergence(np.array([0.5, 0.5]), Tensor([1.0, 0.0])).item()
        assert np.isfinite(value)
        assert value == pytest.approx(0.5 * np.log(0.5 / 1e-12) + 0.5 * np.log(0.5))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            kl_divergence(np.ones(3) / 3, Tensor(np.ones(2) / 2))


class TestCrossEntropy:
    def test_uniform_logits(self):
        assert cross_entropy_nll(Tensor(np.zeros(4)), 1).item() == pytest.approx(np.log(4.0))

    def test_target_out_of_range(self):
        with pytest.raises(TargetIndexError):
            cross_entropy_nll(Tensor(np.zeros((2, 3))), np.array([0, 3]))


class TestDropout:
    def test_identity_without_generator(self):
        x = Tensor(np.ones(5))
        assert dropout(x, 0.5, None) is x

    def test_inverted_scaling(self, rng):
        out = dropout(Tensor(np.ones(10000)), 0.25, rng).data
        assert set(np.unique(out)) <= {0.0, 1.0 / 0.75}
        assert out.mean() == pytest.approx(1.0, abs=0.05)
