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

import pytest

from unlearnrec.data import build_bundle
from unlearnrec.model import ModelConfig
from unlearnrec.synthetic import SyntheticConfig, generate_synthetic
from unlearnrec.training import TrainConfig, train_original


def micro_config(vocab_size, **overrides):
    """A float64 model small enough for finite-difference checks."""
    values = dict(vocab_size=vocab_size, d_model=8, n_layers=1, n_heads=2, d_ff=16, max_seq_len=64, lora_rank=2,
                  dropout=0.0, dtype='float64')
    values.update(overrides)
    return ModelConfig(**values)


@pytest.fixture(scope='session')
def interactions():
    return generate_synthetic(SyntheticConfig(n_users=12, n_items=20, n_samples=144, n_genres=4, seed=3))


@pytest.fixture(scope='session')
def bundle(interactions):
    return build_bundle(interactions, forgotten_fraction=0.25, seed=0, max_history=3)


@pytest.fixture(scope='session')
def model_config(bundle):
    return micro_config(len(bundle.vocab))


@pytest.fixture(scope='session')
def original(model_config, bundle):
    return train_original(model_config, bundle.train, bundle.valid, TrainConfig(epochs=2, batch_size=16, seed=0))


@pytest.fixture
def make_config():
    return micro_config


@pytest.fixture
def tiny_tree():
    """An experiment tree that runs end to end in seconds."""
    return {
        'seed': 0,
        'methods': ['retrain', 'neggrad', 'e2urec'],
        'data': {'max_history': 3, 'synthetic': {'n_users': 10, 'n_items': 15, 'n_samples': 100, 'n_genres': 3}},
        'model': {'d_model': 8, 'n_layers': 1, 'n_heads': 2, 'd_ff': 16, 'max_seq_len': 64, 'lora_rank': 2,
                  'dropout': 0.0, 'dtype': 'float64'},
        'train': {'epochs': 1, 'batch_size': 16},
        'unlearn': {'epochs': 1, 'augment_epochs': 1, 'batch_size_forget': 8, 'batch_size_retain': 8},
        'finetune': {'epochs': 1, 'batch_size': 16},
        'sharding': {'n_shards': 2},
    }
