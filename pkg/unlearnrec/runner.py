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
Experiment pipeline.

Output layout under output_dir:

    resolved_config.yaml
    comparison.txt, ablation.txt
    seed-<n>/bundle/            prepared data and manifest
    seed-<n>/models/            original and retrained checkpoints
    seed-<n>/reports/<method>.json
    seed-<n>/training.jsonl     per-epoch training events
"""

import glob
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor

from unlearnrec.baselines import MethodContext, get_method
from unlearnrec.checkpoint import load_checkpoint, save_checkpoint
from unlearnrec.data import InteractionFormat, build_bundle, dump_rendered, load_bundle, load_interactions, save_bundle
from unlearnrec.display import Display
from unlearnrec.events import EventLog
from unlearnrec.exceptions import DataError, ReportError
from unlearnrec.metrics import MetricsReport, evaluate_method, time_and_count
from unlearnrec.model import count_params, trainable_count
from unlearnrec.synthetic import generate_synthetic
from unlearnrec.training import train_original

ABLATIONS = (('e2urec', None), ('e2urec-no-fgt', 0.0), ('e2urec-no-rem', 1.0))

_logger = logging.getLogger(__name__)


def seed_dir(config, seed):
    return os.path.join(config.output_dir, 'seed-%d' % seed)


class ModelCache:
    """
    Trains the original and the retrained reference model at most once.

    With a directory, checkpoints are written there and reused by later runs
    of the same configuration. Lookups are serialized, so methods running on
    parallel threads share one training of each model.

    Args:
        bundle (DatasetBundle): Prepared data.
        model_config (ModelConfig): Model shape.
        train_config (TrainConfig): Training schedule.
        directory Optional[str]: Checkpoint directory.
        digest (str): Configuration digest guarding reuse of checkpoints.
        event_log (EventLog): Receives training events.
    """

    def __init__(self, bundle, model_config, train_config, directory=None, digest='', event_log=None):
        self._logger = logging.getLogger(self.__class__.__name__)
        self.bundle = bundle
        self.model_config = model_config
        self.train_config = train_config
        self.directory = directory
        self.digest = digest
        self.event_log = event_log or EventLog()
        self.hits = 0
        self.misses = 0
        self.seconds = {}
        self._models = {}
        self._lock = threading.Lock()

    def original(self):
        return self._get('original', self.bundle.train)

    def reference(self):
        return self._get('retrain', self.bundle.retained)

    def _get(self, name, samples):
        with self._lock:
            return self._get_locked(name, samples)

    def _get_locked(self, name, samples):
        if name in self._models:
            self.hits += 1
            return self._models[name]
        self.misses += 1
        model = self._load(name)
        if model is None:
            self._logger.info('Training the %s model on %d samples', name, len(samples))
            start = time.perf_counter()
            model = train_original(self.model_config, samples, self.bundle.valid, self.train_config, self.event_log)
            self.seconds[name] = time.perf_counter() - start
            self._save(name, model)
        self._models[name] = model
        return model

    def _paths(self, name):
        return os.path.join(self.directory, '%s.npz' % name), os.path.join(self.directory, '%s.json' % name)

    def _load(self, name):
        if not self.directory:
            return None
        checkpoint, sidecar = self._paths(name)
        if not (os.path.isfile(checkpoint) and os.path.isfile(sidecar)):
            return None
        with open(sidecar, encoding='utf-8') as handle:
            meta = json.load(handle)
        if meta.get('digest') != self.digest:
            self._logger.info('Ignoring %s checkpoint written for another configuration', name)
            return None
        self.seconds[name] = meta['seconds']
        return load_checkpoint(checkpoint, expected_config=self.model_config)

    def _save(self, name, model):
        if not self.directory:
            return
        checkpoint, sidecar = self._paths(name)
        save_checkpoint(model, checkpoint)
        with open(sidecar, 'w', encoding='utf-8') as handle:
            json.dump({'digest': self.digest, 'seconds': self.seconds[name]}, handle, sort_keys=True)


def _interactions(config):
    if config.data.source == 'csv':
        return load_interactions(config.data.path, InteractionFormat(config.data.columns, config.data.delimiter))
    return generate_synthetic(config.data.synthetic)


def cmd_prepare(config, dump=False):
    """
    Render, split and partition the data of every seed and write the bundles.

    Returns:
        List[DatasetBundle]: One bundle per seed.
    """
    os.makedirs(config.output_dir, exist_ok=True)
    config.write_resolved(os.path.join(config.output_dir, 'resolved_config.yaml'))
    bundles = []
    for seed in config.run_seeds():
        seeded = config.for_seed(seed)
        bundle = build_bundle(_interactions(seeded), ratios=seeded.data.ratios,
                              forgotten_fraction=seeded.data.forgotten_fraction, seed=seed,
                              max_history=seeded.data.max_history, max_seq_len=seeded.model.build(512).max_seq_len,
                              domain=seeded.data.domain)
        directory = os.path.join(seed_dir(config, seed), 'bundle')
        save_bundle(bundle, directory)
        if dump:
            dump_rendered(bundle, os.path.join(seed_dir(config, seed), 'rendered.jsonl'))
        _logger.info('Prepared seed %d: %r', seed, bundle)
        bundles.append(bundle)
    return bundles


class _SeedRun:
    """Shared state of one seed: bundle, model cache and training log."""

    def __init__(self, config, seed):
        self.config = config.for_seed(seed)
        self.seed = seed
        self.directory = seed_dir(config, seed)
        self.bundle = load_bundle(os.path.join(self.directory, 'bundle'))
        self.model_config = self.config.model.build(len(self.bundle.vocab))
        self.event_log = EventLog(os.path.join(self.directory, 'training.jsonl'))
        self.cache = ModelCache(self.bundle, self.model_config, self.config.train,
                                directory=os.path.join(self.directory, 'models'), digest=self.config.digest(),
                                event_log=self.event_log)

    def context(self, config):
        return MethodContext(original=self.cache.original(), bundle=self.bundle, model_config=self.model_config,
                             train_config=config.train, unlearn_config=config.unlearn,
                             finetune_config=config.finetune, n_shards=config.n_shards, seed=self.seed,
                             reference=self.cache.reference, event_log=self.event_log)

    def original_report(self):
        original = self.cache.original()
        total = count_params(original)[0]
        return evaluate_method('original', original, self.bundle.test, seed=self.seed,
                               wall_time_seconds=self.cache.seconds.get('original', 0.0),
                               trainable_params=trainable_count(original, 'full'), total_params=total,
                               config_digest=self.config.digest(), kl_space=self.config.unlearn.kl_space,
                               jsd_space=self.config.jsd_space)

    def run_method(self, key, config=None, name=None):
        """Run one registered method and score it against the retrained reference."""
        config = config or self.config
        name = name or key
        method = get_method(key)(self.context(config))
        _logger.info('Running method "%s" (seed %d)', name, self.seed)
        method.prepare()
        wall_time, trainable, outcome = time_and_count(method.run)
        reference = None
        if key == 'retrain':
            wall_time = self.cache.seconds.get('retrain', wall_time)
        else:
            reference = self.cache.reference()
        report = evaluate_method(name, outcome.model, self.bundle.test, self.bundle.forgotten, reference,
                                 wall_time_seconds=wall_time, trainable_params=trainable,
                                 total_params=outcome.total_params, seed=self.seed, config_digest=config.digest(),
                                 kl_space=config.unlearn.kl_space, jsd_space=config.jsd_space)
        _logger.info('Finished method "%s" in %.2f s', name, wall_time)
        return report

    def write(self, report):
        directory = os.path.join(self.directory, 'reports')
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, '%s.json' % report.method), 'w', encoding='utf-8') as handle:
            handle.write(report.validate().to_json() + '\n')


def _open_seed(config, seed):
    try:
        return _SeedRun(config, seed)
    except DataError as error:
        raise DataError('%s (run "unlearnrec prepare" first)' % error) from None


def cmd_train(config):
    """
    Train and checkpoint the original and the retrained model of every seed.

    Returns:
        List[ModelCache]: One cache per seed.
    """
    caches = []
    for seed in config.run_seeds():
        run = _open_seed(config, seed)
        run.cache.original()
        run.cache.reference()
        caches.append(run.cache)
    return caches


def cmd_run(config, methods=None, parallel=False):
    """
    Run every requested method from the cached original model and score it.

    The original model is trained once per seed, as is the retrained
    reference. Methods run one after another unless parallel is set, in
    which case their timings are not comparable.

    Returns:
        List[MetricsReport]: Reports of every seed, the original model first.
    """
    methods = list(methods or config.methods)
    for key in methods:
        get_method(key)
    os.makedirs(config.output_dir, exist_ok=True)
    config.write_resolved(os.path.join(config.output_dir, 'resolved_config.yaml'))

    reports = []
    for seed in config.run_seeds():
        run = _open_seed(config, seed)
        run.cache.original()
        run.cache.reference()
        seed_reports = [run.original_report()]
        if parallel:
            _logger.warning('Running %d methods in parallel; wall times are not comparable', len(methods))
            with ThreadPoolExecutor(max_workers=len(methods)) as pool:
                seed_reports += list(pool.map(run.run_method, methods))
        else:
            seed_reports += [run.run_method(key) for key in methods]
        for report in seed_reports:
            run.write(report)
        _logger.info('Seed %d: model cache hits %d, misses %d', seed, run.cache.hits, run.cache.misses)
        reports += seed_reports

    table = Display().comparison_table(reports)
    with open(os.path.join(config.output_dir, 'comparison.txt'), 'w', encoding='utf-8') as handle:
        handle.write(table + '\n')
    return reports


def cmd_ablate(config):
    """
    Run the teacher-student method with both losses, without the forgetting
    loss (beta 0) and without the remembering loss (beta 1).

    Returns:
        List[MetricsReport]: Three reports per seed.
    """
    os.makedirs(config.output_dir, exist_ok=True)
    reports = []
    for seed in config.run_seeds():
        run = _open_seed(config, seed)
        for name, beta in ABLATIONS:
            variant = run.config if beta is None else run.config.with_overrides(beta=beta)
            report = run.run_method('e2urec', config=variant, name=name)
            run.write(report)
            reports.append(report)

    table = Display().ablation_table(reports)
    with open(os.path.join(config.output_dir, 'ablation.txt'), 'w', encoding='utf-8') as handle:
        handle.write(table + '\n')
    return reports


def load_reports(output_dir):
    """
    Read every report written under output_dir.

    Raises:
        ReportError: If a report file fails validation.
        DataError: If no report exists.
    """
    paths = sorted(glob.glob(os.path.join(output_dir, 'seed-*', 'reports', '*.json')))
    if not paths:
        raise DataError('No reports under "%s"; run "unlearnrec run" first' % output_dir)
    reports = []
    for path in paths:
        with open(path, encoding='utf-8') as handle:
            try:
                reports.append(MetricsReport.from_json(handle.read()))
            except (ValueError, TypeError) as error:
                raise ReportError('Invalid report "%s": %s' % (path, error)) from None
    return reports


def cmd_report(config):
    """Render the comparison table from the reports already on disk."""
    reports = [report for report in load_reports(config.output_dir) if not report.method.startswith('e2urec-')]
    return Display().comparison_table(_ordered(reports, config))


def _ordered(reports, config):
    order = ['original'] + list(config.methods)
    rank = {method: index for index, method in enumerate(order)}
    return sorted(reports, key=lambda report: (rank.get(report.method, len(order)), report.method, report.seed))


