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
Experiment configuration.

An experiment is described by a YAML tree. Every key is optional; missing keys
take the defaults below and unknown keys are rejected:

    seed: 0
    seeds: []              # several seeds for averaged tables, [seed] when empty
    output_dir: runs
    methods: [retrain, sisa, receraser, negkl, neggrad, badt, e2urec]
    jsd_space: click
    data:
      source: synthetic    # or csv
      path: null
      columns: {}
      delimiter: ','
      ratios: [0.6, 0.2, 0.2]
      forgotten_fraction: 0.2
      max_history: 10
      domain: movies
      synthetic: {n_users: 100, n_items: 200, n_samples: 3334, ...}
    model: {preset: small, ...}   # ModelConfig fields; vocab_size follows the data
    train: {epochs: 20, patience: 3, ...}
    unlearn: {alpha: 2.0, beta: 0.6, ...}
    finetune: {epochs: 3, ...}
    sharding: {n_shards: 4}

Component seeds are not configured separately: each run sets them to the
experiment seed.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import List, Optional

import yaml

from unlearnrec.baselines import METHODS, FinetuneConfig
from unlearnrec.exceptions import ConfigError
from unlearnrec.metrics import JSD_SPACES
from unlearnrec.model import ModelConfig, PRESETS
from unlearnrec.prompts import DOMAINS
from unlearnrec.synthetic import SyntheticConfig
from unlearnrec.training import TrainConfig
from unlearnrec.unlearning import UnlearnConfig

DEFAULT_METHODS = ('retrain', 'sisa', 'receraser', 'negkl', 'neggrad', 'badt', 'e2urec')


def _build(cls, data, section):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError('Section "%s" must be a mapping' % section)
    known = {item.name for item in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError('Unknown keys in "%s": %s' % (section, sorted(unknown)))
    try:
        return cls(**data)
    except TypeError as error:
        raise ConfigError('Invalid "%s" section: %s' % (section, error)) from None


@dataclass
class DataConfig:
    source: str = 'synthetic'
    path: Optional[str] = None
    columns: dict = field(default_factory=dict)
    delimiter: str = ','
    ratios: List[float] = field(default_factory=lambda: [0.6, 0.2, 0.2])
    forgotten_fraction: float = 0.2
    max_history: int = 10
    domain: str = 'movies'
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)

    def __post_init__(self):
        if isinstance(self.synthetic, dict):
            self.synthetic = _build(SyntheticConfig, self.synthetic, 'data.synthetic')
        self.ratios = [float(ratio) for ratio in self.ratios]
        if self.source not in ('synthetic', 'csv'):
            raise ConfigError('data.source must be synthetic or csv, got "%s"' % self.source)
        if self.source == 'csv' and not self.path:
            raise ConfigError('data.path is required when data.source is csv')
        if len(self.ratios) != 3 or abs(sum(self.ratios) - 1.0) > 1e-9 or min(self.ratios) < 0:
            raise ConfigError('data.ratios must be three non-negative values summing to 1')
        if not 0.0 < self.forgotten_fraction < 1.0:
            raise ConfigError('data.forgotten_fraction must lie in (0, 1)')
        if self.max_history < 0:
            raise ConfigError('data.max_history must be non-negative')
        if self.domain not in DOMAINS:
            raise ConfigError('data.domain must be one of %s' % sorted(DOMAINS))


@dataclass
class ModelSection:
    """A backbone preset plus ModelConfig overrides; vocab_size comes from the data."""

    preset: str = 'small'
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError('model.preset must be one of %s' % sorted(PRESETS))
        if 'vocab_size' in self.overrides:
            raise ConfigError('model.vocab_size follows the prepared vocabulary and cannot be set')
        self.build(vocab_size=ModelConfig().vocab_size)

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        preset = data.pop('preset', 'small')
        known = {item.name for item in fields(ModelConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError('Unknown keys in "model": %s' % sorted(unknown))
        return cls(preset=preset, overrides=data)

    def build(self, vocab_size):
        return ModelConfig.from_preset(self.preset, vocab_size=vocab_size, **self.overrides)

    def to_dict(self):
        data = {'preset': self.preset}
        defaults = ModelConfig.from_preset(self.preset).to_dict()
        defaults.pop('vocab_size')
        data.update(defaults)
        data.update({key: list(value) if isinstance(value, tuple) else value for key, value in self.overrides.items()})
        return data


@dataclass
class ExperimentConfig:
    seed: int = 0
    seeds: List[int] = field(default_factory=list)
    output_dir: str = 'runs'
    methods: List[str] = field(default_factory=lambda: list(DEFAULT_METHODS))
    jsd_space: str = 'click'
    n_shards: int = 4
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    unlearn: UnlearnConfig = field(default_factory=UnlearnConfig)
    finetune: FinetuneConfig = field(default_factory=FinetuneConfig)

    def __post_init__(self):
        unknown = [method for method in self.methods if method not in METHODS]
        if unknown:
            raise ConfigError('Unknown methods %s, registered methods: %s' % (unknown, ', '.join(sorted(METHODS))))
        if self.jsd_space not in JSD_SPACES:
            raise ConfigError('jsd_space must be one of %s' % (JSD_SPACES,))
        if self.n_shards < 1:
            raise ConfigError('sharding.n_shards must be positive')

    @classmethod
    def from_dict(cls, data):
        """
        Build a config from a parsed YAML tree.

        Raises:
            ConfigError: On unknown keys or invalid values.
        """
        data = dict(data or {})
        sections = {'data', 'model', 'train', 'unlearn', 'finetune', 'sharding'}
        top = {'seed', 'seeds', 'output_dir', 'methods', 'jsd_space'}
        unknown = set(data) - sections - top
        if unknown:
            raise ConfigError('Unknown configuration keys %s' % sorted(unknown))

        sharding = data.get('sharding') or {}
        if set(sharding) - {'n_shards'}:
            raise ConfigError('Unknown keys in "sharding": %s' % sorted(set(sharding) - {'n_shards'}))
        values = {key: data[key] for key in top if key in data}
        if 'methods' in values:
            values['methods'] = list(values['methods'])
        config = cls(data=_build(DataConfig, data.get('data'), 'data'),
                     model=ModelSection.from_dict(data.get('model')),
                     train=_build(TrainConfig, data.get('train'), 'train'),
                     unlearn=_build(UnlearnConfig, data.get('unlearn'), 'unlearn'),
                     finetune=_build(FinetuneConfig, data.get('finetune'), 'finetune'),
                     n_shards=sharding.get('n_shards', 4), **values)
        return config._seeded(config.seed, config.seeds)

    def run_seeds(self):
        return list(self.seeds) if self.seeds else [self.seed]

    def _seeded(self, seed, seeds):
        data = replace(self.data, synthetic=replace(self.data.synthetic, seed=seed))
        return replace(self, seed=seed, seeds=list(seeds), data=data, train=replace(self.train, seed=seed),
                       unlearn=replace(self.unlearn, seed=seed), finetune=replace(self.finetune, seed=seed))

    def for_seed(self, seed):
        """Copy for a single seed, with every component seed set to it."""
        return self._seeded(seed, [])

    def with_overrides(self, seed=None, methods=None, output_dir=None, beta=None):
        """Apply command-line overrides; a --seed replaces any seeds list."""
        config = self
        if seed is not None:
            config = config._seeded(seed, [])
        if methods is not None:
            config = replace(config, methods=list(methods))
        if output_dir is not None:
            config = replace(config, output_dir=output_dir)
        if beta is not None:
            config = replace(config, unlearn=replace(config.unlearn, beta=beta))
        return config

    def resolved(self):
        """The fully defaulted configuration tree."""
        data = asdict(self.data)
        return {
            'seed': self.seed,
            'seeds': list(self.seeds),
            'output_dir': self.output_dir,
            'methods': list(self.methods),
            'jsd_space': self.jsd_space,
            'data': data,
            'model': self.model.to_dict(),
            'train': self.train.to_dict(),
            'unlearn': self.unlearn.to_dict(),
            'finetune': self.finetune.to_dict(),
            'sharding': {'n_shards': self.n_shards},
        }

    def digest(self):
        """SHA-256 over the canonical JSON of the resolved tree, ignoring output_dir."""
        tree = self.resolved()
        del tree['output_dir']
        return hashlib.sha256(json.dumps(tree, sort_keys=True).encode('utf-8')).hexdigest()

    def write_resolved(self, path):
        with open(path, 'w', encoding='utf-8') as handle:
            yaml.safe_dump(self.resolved(), handle, default_flow_style=False, sort_keys=True)


def load_config(path=None):
    """
    Read an experiment config file; no path gives the defaults.

    Raises:
        ConfigError: If the file is missing, not YAML or holds invalid keys.
    """
    if path is None:
        return ExperimentConfig()
    try:
        with open(path, encoding='utf-8') as handle:
            data = yaml.safe_load(handle)
    except OSError as error:
        raise ConfigError('Cannot read config "%s": %s' % (path, error)) from None
    except yaml.YAMLError as error:
        raise ConfigError('Config "%s" is not valid YAML: %s' % (path, error)) from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError('Config "%s" must hold a mapping' % path)
    return ExperimentConfig.from_dict(data)
