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

from unlearnrec.baselines import (METHODS, FinetuneConfig, MethodContext, badt_unlearn, get_method, neggrad_loss,
                                  neggrad_unlearn, negkl_loss, negkl_unlearn, random_answers, retrain_from_scratch)
from unlearnrec.exceptions import ConfigError
from unlearnrec.metrics import acc
from unlearnrec.model import count_params, predict_clicks, prediction_loss
from unlearnrec.prompts import NO_ID, YES_ID
from unlearnrec.sharding import ShardEnsemble
from unlearnrec.training import TrainConfig, evaluate_loss, train_original
from unlearnrec.unlearning import UnlearnConfig, finetune_augmented

FINETUNE = FinetuneConfig(epochs=1, learning_rate=0.01, batch_size=16)


@pytest.fixture(scope='module')
def context(original, bundle, model_config):
    return MethodContext(original=original, bundle=bundle, model_config=model_config,
                         train_config=TrainConfig(epochs=1, batch_size=16),
                         unlearn_config=UnlearnConfig(epochs=1, augment_epochs=1, batch_size_forget=8),
                         finetune_config=FINETUNE, n_shards=2)


class TestRetrain:
    def test_matches_training_without_forgotten_data(self, model_config, bundle):
        config = TrainConfig(epochs=1, batch_size=16, seed=2)
        retrained = retrain_from_scratch(model_config, bundle.retained, bundle.valid, config)
        assert retrained.state_hash() == train_original(model_config, bundle.retained, bundle.valid,
                                                        config).state_hash()


class TestNegatedLosses:
    def test_neggrad_subtracts_forgotten_loss(self, original, bundle):
        retain, forget = bundle.retained[:4], bundle.forgotten[:4]
        expected = prediction_loss(original, retain).item() - prediction_loss(original, forget).item()
        assert neggrad_loss(original, retain, forget).item() == pytest.approx(expected)

    def test_neggrad_floor(self, original, bundle):
        value = neggrad_loss(original, None, bundle.forgotten[:4], floor=-1e-3).item()
        assert value == pytest.approx(-1e-3)

    def test_negkl_is_zero_at_the_original(self, original, bundle):
        value = negkl_loss(original, original, bundle.retained[:4], bundle.forgotten[:4]).item()
        assert value == pytest.approx(0.0, abs=1e-9)

    def test_floor_must_be_negative(self):
        with pytest.raises(ConfigError):
            FinetuneConfig(loss_floor=0.0)


class TestFinetuneBaselines:
    @pytest.mark.parametrize('unlearn', [neggrad_unlearn, negkl_unlearn, badt_unlearn])
    def test_changes_weights_but_not_original(self, unlearn, original, bundle):
        before = original.state_hash()
        model = unlearn(original, bundle.forgotten, bundle.retained, FINETUNE)
        assert original.state_hash() == before
        assert model.state_hash() != before
        assert model.mode == 'frozen'

    def test_ascends_forgotten_loss_without_retained_data(self, original, bundle):
        model = neggrad_unlearn(original, bundle.forgotten, [], FINETUNE)
        assert prediction_loss(model, bundle.forgotten).item() > prediction_loss(original, bundle.forgotten).item()

    def test_neggrad_raises_forgotten_loss_with_retained_data(self, original, bundle):
        model = neggrad_unlearn(original, bundle.forgotten, bundle.retained,
                                FinetuneConfig(epochs=3, learning_rate=0.01, batch_size=16))
        assert evaluate_loss(model, bundle.forgotten) > evaluate_loss(original, bundle.forgotten)

    def test_negkl_holds_at_the_floor(self, original, bundle):
        far = original.copy().set_mode('full')
        far.base['head'].data *= -1000.0
        loss = negkl_loss(far, original, None, bundle.forgotten[:4])
        assert loss.item() == pytest.approx(-10.0)
        loss.backward()
        assert all(tensor.grad is None or not np.any(tensor.grad) for tensor in far.parameters())

    def test_badt_pulls_forgotten_predictions_towards_a_coin_flip(self, original, bundle):
        fitted = finetune_augmented(original, bundle.forgotten, epochs=10, learning_rate=0.01)
        labels = [sample.label for sample in bundle.forgotten]
        before = predict_clicks(fitted, bundle.forgotten)
        model = badt_unlearn(fitted, bundle.forgotten, [], FinetuneConfig(epochs=10, learning_rate=0.01, batch_size=8),
                             seed=0)
        after = predict_clicks(model, bundle.forgotten)
        assert np.abs(after - 0.5).mean() < np.abs(before - 0.5).mean()
        assert abs(acc(after, labels) - 0.5) <= abs(acc(before, labels) - 0.5)

    def test_zero_epochs(self, original, bundle):
        model = neggrad_unlearn(original, bundle.forgotten, bundle.retained, FinetuneConfig(epochs=0))
        assert model.state_hash() == original.state_hash()

    def test_badt_deterministic(self, original, bundle):
        first = badt_unlearn(original, bundle.forgotten, bundle.retained, FINETUNE, seed=1)
        second = badt_unlearn(original, bundle.forgotten, bundle.retained, FINETUNE, seed=1)
        assert first.state_hash() == second.state_hash()

    def test_random_answers(self, bundle):
        relabeled = random_answers(bundle.forgotten, np.random.default_rng(0))
        assert [s.token_ids for s in relabeled] == [s.token_ids for s in bundle.forgotten]
        assert all(s.answer_token_id == (YES_ID if s.label else NO_ID) for s in relabeled)
        assert {s.label for s in random_answers(bundle.train, np.random.default_rng(0))} == {0, 1}


class TestRegistry:
    def test_all_methods_registered(self):
        assert set(METHODS) == {'retrain', 'sisa', 'receraser', 'negkl', 'neggrad', 'badt', 'e2urec'}

    def test_unknown_method_lists_keys(self):
        with pytest.raises(ConfigError, match='e2urec'):
            get_method('scrub')

    def test_retrain_uses_reference(self, context, original):
        calls = []

        def reference():
            calls.append(1)
            return original

        method = get_method('retrain')(MethodContext(original=original, bundle=context.bundle,
                                                     model_config=context.model_config, reference=reference))
        assert method.run().model is original
        assert calls == [1]

    def test_full_parameter_methods_bill_every_weight(self, context):
        outcome = get_method('neggrad')(context).run()
        total = count_params(context.original)[0]
        assert outcome.trainable_params == outcome.total_params == total

    def test_teacher_method_bills_adapters(self, context):
        outcome = get_method('e2urec')(context).run()
        total, _ = count_params(outcome.model)
        assert outcome.total_params == total
        assert 0 < outcome.trainable_params < count_params(context.original)[0]
        assert outcome.model.base_hash() == context.original.base_hash()

    @pytest.mark.parametrize('key', ['sisa', 'receraser'])
    def test_shard_methods_train_in_prepare(self, key, context):
        method = get_method(key)(context)
        method.prepare()
        assert isinstance(method.ensemble, ShardEnsemble)
        outcome = method.run()
        assert outcome.model.retrained
        assert outcome.total_params == outcome.trainable_params
