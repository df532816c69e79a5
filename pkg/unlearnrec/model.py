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
A tiny decoder-only transformer that answers "Yes" or "No" to a prompt.

Weights live in two groups. The base group holds every transformer weight
(embeddings, attention and feed-forward projections, layer norms, output
head). The lora group holds one pair of low-rank factors (A, B) per adapted
projection. In 'lora' mode only the factors train and the base group stays
bit-identical.
"""

import hashlib
import logging
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.special import expit, softmax as np_softmax

from unlearnrec.exceptions import ConfigError, ContractError, EmptyDatasetError, SequenceLengthError
from unlearnrec.prompts import NO_ID, PAD_ID, YES_ID
from unlearnrec.tensor import Tensor, cross_entropy_nll, dropout, layer_norm, no_grad, softmax

LORA_TARGETS = ('query', 'key', 'value', 'output')
MODES = ('full', 'lora', 'frozen')
MASK_VALUE = -1e9
INIT_STD = 0.02

PRESETS = {
    'small': {},
    'base': {'d_model': 128, 'n_layers': 4, 'n_heads': 4, 'd_ff': 256},
    'wide': {'d_model': 96, 'n_layers': 2, 'n_heads': 3, 'd_ff': 384},
}

_logger = logging.getLogger(__name__)


@dataclass
class ModelConfig:
    """
    Shape of the recommender.

    Raises:
        ConfigError: If d_model is not divisible by n_heads, the LoRA rank is
            outside [1, d_model), or another field is out of range.
    """

    vocab_size: int = 512
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 2
    d_ff: int = 128
    max_seq_len: int = 128
    lora_rank: int = 4
    lora_scale: float = 16.0
    lora_targets: tuple = ('query', 'value')
    dropout: float = 0.1
    dtype: str = 'float32'

    def __post_init__(self):
        self.lora_targets = tuple(self.lora_targets)
        if self.vocab_size < 4:
            raise ConfigError('vocab_size must cover the 4 reserved tokens, got %d' % self.vocab_size)
        if min(self.d_model, self.n_layers, self.n_heads, self.d_ff, self.max_seq_len) < 1:
            raise ConfigError('Model dimensions must be positive')
        if self.d_model % self.n_heads:
            raise ConfigError('d_model %d is not divisible by n_heads %d' % (self.d_model, self.n_heads))
        if not 1 <= self.lora_rank < self.d_model:
            raise ConfigError('lora_rank must lie in [1, d_model), got %d' % self.lora_rank)
        unknown = set(self.lora_targets) - set(LORA_TARGETS)
        if unknown or not self.lora_targets:
            raise ConfigError('lora_targets must be a non-empty subset of %s' % (LORA_TARGETS,))
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError('dropout must lie in [0, 1), got %r' % self.dropout)
        if self.dtype not in ('float32', 'float64'):
            raise ConfigError('dtype must be float32 or float64, got "%s"' % self.dtype)

    @classmethod
    def from_preset(cls, name='small', **overrides):
        """Build a config from a named backbone size plus explicit overrides."""
        if name not in PRESETS:
            raise ConfigError('Unknown model preset "%s", expected one of %s' % (name, sorted(PRESETS)))
        values = dict(PRESETS[name])
        values.update(overrides)
        return cls(**values)

    @classmethod
    def from_dict(cls, data):
        known = {field.name for field in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError('Unknown model config keys %s' % sorted(unknown))
        return cls(**data)

    def to_dict(self):
        data = asdict(self)
        data['lora_targets'] = list(self.lora_targets)
        return data

    @property
    def head_dim(self):
        return self.d_model // self.n_heads


@dataclass
class LogitRecord:
    """Answer-position logits and the click probability read off them."""

    answer_logits: Tensor
    p_click: float


class ModelParams:
    """
    Weights of one recommender instance.

    Args:
        config (ModelConfig): Model shape.
        base (dict): Name to Tensor for every transformer weight.
        lora (dict): Name to Tensor for the low-rank factors, may be empty.
        lora_enabled (bool): Whether forward adds the adapter contribution.
    """

    def __init__(self, config, base, lora=None, lora_enabled=False):
        self._logger = logging.getLogger(self.__class__.__name__)
        self.config = config
        self.base = base
        self.lora = lora or {}
        self.lora_enabled = lora_enabled
        self.mode = 'frozen'
        self.set_mode('frozen')

    def set_mode(self, mode):
        """
        Choose which group trains.

        Args:
            mode (str): 'full' trains the base group, 'lora' trains only the
                adapters, 'frozen' trains nothing.

        Raises:
            ConfigError: If the mode is unknown.
            ContractError: If 'lora' is requested without adapters.
        """
        if mode not in MODES:
            raise ConfigError('Unknown training mode "%s"' % mode)
        if mode == 'lora' and not self.lora:
            raise ContractError('LoRA mode requires attached adapters')
        for tensor in self.base.values():
            tensor.requires_grad = mode == 'full'
            tensor.grad = None
        for tensor in self.lora.values():
            tensor.requires_grad = mode == 'lora'
            tensor.grad = None
        self.mode = mode
        return self

    def named_parameters(self):
        return list(self.base.items()) + list(self.lora.items())

    def parameters(self):
        return [tensor for _, tensor in self.named_parameters()]

    def trainable_parameters(self):
        return [tensor for tensor in self.parameters() if tensor.requires_grad]

    def copy(self):
        """Deep copy with the same mode."""
        clone = ModelParams(self.config, {name: Tensor(t.data.copy()) for name, t in self.base.items()},
                            {name: Tensor(t.data.copy()) for name, t in self.lora.items()}, self.lora_enabled)
        return clone.set_mode(self.mode)

    def base_hash(self):
        """64-bit content hash of the base group."""
        return _hash_tensors(self.base.items())

    def state_hash(self):
        """64-bit content hash of every weight."""
        return _hash_tensors(self.named_parameters())

    def predict(self, samples, batch_size=64):
        return predict_clicks(self, samples, batch_size=batch_size)

    def predict_distributions(self, samples, space='vocab', batch_size=64):
        return predict_distributions(self, samples, space=space, batch_size=batch_size)

    def __repr__(self):
        total, trainable = count_params(self)
        return 'ModelParams(mode=%s, lora_enabled=%r, params=%d, trainable=%d)' % (
            self.mode, self.lora_enabled, total, trainable)


def _hash_tensors(items):
    digest = hashlib.blake2b(digest_size=8)
    for name, tensor in items:
        digest.update(name.encode('utf-8'))
        digest.update(str(tensor.dtype).encode('utf-8'))
        digest.update(repr(tensor.shape).encode('utf-8'))
        digest.update(np.ascontiguousarray(tensor.data).tobytes())
    return digest.hexdigest()


def init_params(config, seed=0):
    """
    Draw a fresh base model.

    Matrices are N(0, 0.02); layer-norm gains are one, biases zero.

    Returns:
        ModelParams: Base-only model in 'full' mode.
    """
    rng = np.random.default_rng(seed)
    dtype = np.dtype(config.dtype)
    d, ff = config.d_model, config.d_ff

    def normal(*shape):
        return Tensor(rng.normal(0.0, INIT_STD, size=shape).astype(dtype))

    base = {
        'tok_embed': normal(config.vocab_size, d),
        'pos_embed': normal(config.max_seq_len, d),
    }
    for layer in range(config.n_layers):
        prefix = 'layers.%d.' % layer
        base[prefix + 'ln1.gamma'] = Tensor(np.ones(d, dtype=dtype))
        base[prefix + 'ln1.beta'] = Tensor(np.zeros(d, dtype=dtype))
        for target in LORA_TARGETS:
            base[prefix + 'attn.' + target] = normal(d, d)
        base[prefix + 'ln2.gamma'] = Tensor(np.ones(d, dtype=dtype))
        base[prefix + 'ln2.beta'] = Tensor(np.zeros(d, dtype=dtype))
        base[prefix + 'ff.w1'] = normal(d, ff)
        base[prefix + 'ff.b1'] = Tensor(np.zeros(ff, dtype=dtype))
        base[prefix + 'ff.w2'] = normal(ff, d)
        base[prefix + 'ff.b2'] = Tensor(np.zeros(d, dtype=dtype))
    base['ln_f.gamma'] = Tensor(np.ones(d, dtype=dtype))
    base['ln_f.beta'] = Tensor(np.zeros(d, dtype=dtype))
    base['head'] = normal(d, config.vocab_size)
    return ModelParams(config, base).set_mode('full')


def attach_lora(params, seed=0):
    """
    Return a copy of params with fresh adapters on every target projection.

    A is N(0, 0.02) of shape [r, d_in] and B is zero of shape [d_out, r], so
    the adapted model starts bit-identical to the base model.

    Returns:
        ModelParams: Copy in 'lora' mode with adapters enabled.
    """
    config = params.config
    rng = np.random.default_rng(seed)
    dtype = np.dtype(config.dtype)
    lora = {}
    for layer in range(config.n_layers):
        for target in config.lora_targets:
            d_in = d_out = config.d_model
            name = 'layers.%d.attn.%s' % (layer, target)
            lora[name + '.lora_a'] = Tensor(rng.normal(0.0, INIT_STD, size=(config.lora_rank, d_in)).astype(dtype))
            lora[name + '.lora_b'] = Tensor(np.zeros((d_out, config.lora_rank), dtype=dtype))
    adapted = ModelParams(config, {name: Tensor(t.data.copy()) for name, t in params.base.items()}, lora, True)
    return adapted.set_mode('lora')


def count_params(params):
    """
    Count weights by role.

    Returns:
        tuple: (total, trainable) where total covers both groups.
    """
    total = sum(tensor.size for tensor in params.parameters())
    trainable = sum(tensor.size for tensor in params.trainable_parameters())
    return int(total), int(trainable)


def trainable_count(params, mode):
    """Number of weights that train when params is put in mode."""
    if mode not in MODES:
        raise ConfigError('Unknown training mode "%s"' % mode)
    group = {'full': params.base, 'lora': params.lora, 'frozen': {}}[mode]
    return int(sum(tensor.size for tensor in group.values()))


def _project(params, x, name):
    out = x @ params.base[name]
    if params.lora_enabled and name + '.lora_a' in params.lora:
        config = params.config
        lora_a = params.lora[name + '.lora_a']
        lora_b = params.lora[name + '.lora_b']
        out = out + (x @ lora_a.transpose()) @ lora_b.transpose() * (config.lora_scale / config.lora_rank)
    return out


def _pad(token_lists, config):
    lengths = np.array([len(tokens) for tokens in token_lists], dtype=np.intp)
    if lengths.min() < 1:
        raise SequenceLengthError('Cannot run an empty token sequence')
    if lengths.max() > config.max_seq_len:
        raise SequenceLengthError('Sequence of %d tokens exceeds max_seq_len %d' % (lengths.max(), config.max_seq_len))
    ids = np.full((len(token_lists), lengths.max()), PAD_ID, dtype=np.intp)
    for row, tokens in enumerate(token_lists):
        ids[row, :len(tokens)] = tokens
    return ids, lengths


def forward_batch(params, token_lists, training=False, rng=None):
    """
    Run the transformer over right-padded sequences.

    Args:
        params (ModelParams): Model.
        token_lists (List[Sequence[int]]): Token sequences, each predicting
            its next token at its last position.
        training (bool): Apply dropout with rng.
        rng (numpy.random.Generator): Dropout stream.

    Returns:
        Tensor: Logits of shape [batch, vocab_size] at each sequence's last
            position.

    Raises:
        SequenceLengthError: If a sequence is empty or longer than
            max_seq_len.
    """
    config = params.config
    dtype = np.dtype(config.dtype)
    rate = config.dropout if training else 0.0
    ids, lengths = _pad(token_lists, config)
    batch, length = ids.shape
    heads, head_dim = config.n_heads, config.head_dim

    x = params.base['tok_embed'][ids] + params.base['pos_embed'][:length]
    mask = Tensor((np.triu(np.ones((length, length)), k=1) * MASK_VALUE).astype(dtype))
    scale = 1.0 / np.sqrt(head_dim)

    def split_heads(t):
        return t.reshape(batch, length, heads, head_dim).transpose(0, 2, 1, 3)

    for layer in range(config.n_layers):
        prefix = 'layers.%d.' % layer
        h = layer_norm(x, params.base[prefix + 'ln1.gamma'], params.base[prefix + 'ln1.beta'])
        query = split_heads(_project(params, h, prefix + 'attn.query'))
        key = split_heads(_project(params, h, prefix + 'attn.key'))
        value = split_heads(_project(params, h, prefix + 'attn.value'))
        weights = softmax(query @ key.transpose(0, 1, 3, 2) * scale + mask, axis=-1)
        weights = dropout(weights, rate, rng)
        context = (weights @ value).transpose(0, 2, 1, 3).reshape(batch, length, config.d_model)
        x = x + dropout(_project(params, context, prefix + 'attn.output'), rate, rng)

        h = layer_norm(x, params.base[prefix + 'ln2.gamma'], params.base[prefix + 'ln2.beta'])
        h = (h @ params.base[prefix + 'ff.w1'] + params.base[prefix + 'ff.b1']).relu()
        h = h @ params.base[prefix + 'ff.w2'] + params.base[prefix + 'ff.b2']
        x = x + dropout(h, rate, rng)

    last = x[np.arange(batch), lengths - 1]
    last = layer_norm(last, params.base['ln_f.gamma'], params.base['ln_f.beta'])
    return last @ params.base['head']


def click_probability(logits):
    """Softmax over the "Yes" and "No" logits, evaluated at "Yes"."""
    logits = np.asarray(logits, dtype=np.float64)
    return expit(logits[..., YES_ID] - logits[..., NO_ID])


def forward(params, sample):
    """
    Score one rendered sample.

    Returns:
        LogitRecord: Answer-position logits and p_click.
    """
    logits = forward_batch(params, [sample.token_ids])[0]
    return LogitRecord(answer_logits=logits, p_click=float(click_probability(logits.data)))


def prediction_loss(params, batch, training=False, rng=None):
    """
    Mean negative log-likelihood of the answer tokens.

    Raises:
        EmptyDatasetError: If batch is empty.
    """
    if not batch:
        raise EmptyDatasetError('Prediction loss needs a non-empty batch')
    logits = forward_batch(params, [sample.token_ids for sample in batch], training=training, rng=rng)
    targets = np.array([sample.answer_token_id for sample in batch], dtype=np.intp)
    return cross_entropy_nll(logits, targets).mean()


def sequence_nll(params, prompt_ids, answer_ids):
    """
    Negative log-likelihood of a multi-token answer, summed over its tokens.

    Each answer token is predicted from the prompt plus the answer tokens
    before it. A single-token answer reduces to one cross-entropy term.
    """
    if not answer_ids:
        raise ContractError('Answer must hold at least one token')
    prompt_ids, answer_ids = list(prompt_ids), list(answer_ids)
    prefixes = [prompt_ids + answer_ids[:step] for step in range(len(answer_ids))]
    logits = forward_batch(params, prefixes)
    return cross_entropy_nll(logits, np.array(answer_ids, dtype=np.intp)).sum()


def predict_logits(params, samples, batch_size=64):
    """Answer-position logits as a float64 array of shape [n, vocab_size]."""
    if not samples:
        return np.zeros((0, params.config.vocab_size))
    chunks = []
    with no_grad():
        for start in range(0, len(samples), batch_size):
            chunk = samples[start:start + batch_size]
            chunks.append(forward_batch(params, [sample.token_ids for sample in chunk]).data.astype(np.float64))
    return np.concatenate(chunks, axis=0)


def predict_clicks(params, samples, batch_size=64):
    """Click probabilities for samples, in order."""
    return click_probability(predict_logits(params, samples, batch_size=batch_size))


def restrict_logits(logits, space):
    """Restrict logits to the space teacher distributions are compared in."""
    if space == 'vocab':
        return logits
    if space == 'answer':
        return logits[:, [YES_ID, NO_ID]]
    raise ConfigError('Unknown distribution space "%s", expected vocab or answer' % space)


def predict_distributions(params, samples, space='vocab', batch_size=64):
    """
    Answer-position output distributions.

    Args:
        space (str): 'vocab' for the softmax over the whole vocabulary,
            'answer' for the softmax over ("Yes", "No").

    Returns:
        numpy.ndarray: Rows of probabilities.
    """
    return np_softmax(restrict_logits(predict_logits(params, samples, batch_size=batch_size), space), axis=-1)
