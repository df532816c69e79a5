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

import hashlib
import json
import logging
import math
import os
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
import pandas as pd

from unlearnrec.exceptions import (ConfigError, DataError, EmptyDatasetError, PartitionError, SchemaError,
                                   ValidationError)
from unlearnrec.prompts import PromptTemplate, RenderedSample, Vocabulary, build_vocabulary, detokenize, render_prompt

FIELDS = ('user_id', 'item_id', 'item_title', 'timestamp', 'label')

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Interaction:
    """
    One user-item event.

    Raises:
        ValidationError: If the label is not binary or the timestamp negative.
    """

    user_id: str
    item_id: str
    item_title: str
    timestamp: int
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValidationError('Label must be 0 or 1, got %r' % (self.label,))
        if self.timestamp < 0:
            raise ValidationError('Timestamp must be non-negative, got %r' % (self.timestamp,))

    def order_key(self):
        """Global time order with a deterministic tie-break."""
        return self.timestamp, self.user_id, self.item_id, self.label, self.item_title


class InteractionFormat:
    """
    Describes the columns of an interaction CSV file.

    Args:
        columns (dict): Optional mapping from field name to column header.
        delimiter (str): Field separator.
    """

    def __init__(self, columns=None, delimiter=','):
        self.columns = {field: field for field in FIELDS}
        if columns:
            unknown = set(columns) - set(FIELDS)
            if unknown:
                raise ConfigError('Unknown interaction fields %s' % sorted(unknown))
            self.columns.update(columns)
        self.delimiter = delimiter

    def __repr__(self):
        return 'InteractionFormat(columns=%r, delimiter=%r)' % (self.columns, self.delimiter)


def load_interactions(path, fmt=None):
    """
    Read and validate an interaction log.

    Args:
        path (str): CSV file with a header row, UTF-8, titles optionally quoted.
        fmt (InteractionFormat): Column description, the default header
            user_id,item_id,item_title,timestamp,label otherwise.

    Returns:
        List[Interaction]: Rows in file order.

    Raises:
        DataError: If the file does not exist or cannot be parsed.
        SchemaError: If a column is missing.
        ValidationError: If a row holds an invalid value; the message names
            the line.
    """
    fmt = fmt or InteractionFormat()
    if not os.path.isfile(path):
        raise DataError('Interaction file "%s" not found' % path)

    try:
        frame = pd.read_csv(path, sep=fmt.delimiter, dtype=str, keep_default_na=False, encoding='utf-8')
    except pd.errors.EmptyDataError:
        raise SchemaError('Interaction file "%s" is empty' % path) from None
    except pd.errors.ParserError as error:
        raise ValidationError('Cannot parse "%s": %s' % (path, error)) from None

    missing = [column for column in fmt.columns.values() if column not in frame.columns]
    if missing:
        raise SchemaError('Interaction file "%s" is missing columns %s' % (path, missing))

    interactions = []
    columns = [fmt.columns[field] for field in FIELDS]
    for offset, (user_id, item_id, title, timestamp, label) in enumerate(
            frame[columns].itertuples(index=False, name=None)):
        line = offset + 2
        try:
            timestamp = int(timestamp)
        except ValueError:
            raise ValidationError('Line %d: timestamp %r is not an integer' % (line, timestamp)) from None
        if label not in ('0', '1'):
            raise ValidationError('Line %d: label %r is not binary' % (line, label))
        if not user_id or not item_id or not title:
            raise ValidationError('Line %d: user_id, item_id and item_title must be non-empty' % line)
        try:
            interactions.append(Interaction(user_id, item_id, title, timestamp, int(label)))
        except ValidationError as error:
            raise ValidationError('Line %d: %s' % (line, error)) from None

    _logger.info('Loaded %d interactions from "%s"', len(interactions), path)
    return interactions


def write_interactions(interactions, path):
    """Write interactions as a CSV file readable by load_interactions."""
    frame = pd.DataFrame([[getattr(row, field) for field in FIELDS] for row in interactions], columns=list(FIELDS))
    frame.to_csv(path, index=False, encoding='utf-8')


def _split_bounds(count, ratios):
    if len(ratios) != 3 or any(ratio < 0 for ratio in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError('Split ratios must be three non-negative values summing to 1, got %r' % (ratios,))
    first = int(math.floor(count * ratios[0] + 1e-9))
    second = int(math.floor(count * (ratios[0] + ratios[1]) + 1e-9))
    return first, second


def temporal_split(data, ratios=(0.6, 0.2, 0.2)):
    """
    Split by global timestamp into train, valid and test.

    Rows are ordered by timestamp, ties broken by user_id then item_id, and
    cut at the cumulative ratio boundaries.

    Returns:
        tuple: (train, valid, test) lists of Interaction.

    Raises:
        EmptyDatasetError: If data is empty.
    """
    if not data:
        raise EmptyDatasetError('Cannot split an empty dataset')
    ordered = sorted(data, key=Interaction.order_key)
    first, second = _split_bounds(len(ordered), ratios)
    return ordered[:first], ordered[first:second], ordered[second:]


def select_forgotten_users(train, fraction=0.2, seed=0):
    """
    Choose the users who request removal of their training data.

    ceil(fraction * users) users are drawn without replacement, at least one
    and never all of them. Every training sample of a chosen user goes to the
    forgotten set.

    Args:
        train (List[RenderedSample]): Training samples, anything with user_id.
        fraction (float): Share of distinct users to forget, in (0, 1).
        seed (int): Sampling seed.

    Returns:
        tuple: (forgotten, retained, forgotten_user_ids)

    Raises:
        ConfigError: If fraction is outside (0, 1).
        PartitionError: If train holds fewer than two users.
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError('Forgotten fraction must lie in (0, 1), got %r' % fraction)
    users = sorted({sample.user_id for sample in train})
    if len(users) < 2:
        raise PartitionError('At least two distinct users are needed, found %d' % len(users))

    count = min(len(users) - 1, max(1, int(math.ceil(fraction * len(users) - 1e-9))))
    rng = np.random.default_rng(seed)
    chosen = frozenset(users[index] for index in rng.choice(len(users), size=count, replace=False))

    forgotten = [sample for sample in train if sample.user_id in chosen]
    retained = [sample for sample in train if sample.user_id not in chosen]
    return forgotten, retained, chosen


def attach_histories(ordered):
    """
    Pair every interaction with the titles of its user's earlier clicks.

    Args:
        ordered (List[Interaction]): Interactions in global time order.

    Returns:
        List[tuple]: (interaction, history) pairs, history oldest first.
    """
    clicked = defaultdict(list)
    result = []
    for interaction in ordered:
        result.append((interaction, tuple(clicked[interaction.user_id])))
        if interaction.label == 1:
            clicked[interaction.user_id].append(interaction.item_title)
    return result


class DatasetBundle:
    """
    Rendered splits plus the forgotten/retained partition of train.

    Args:
        train (List[RenderedSample]): Training split D.
        valid (List[RenderedSample]): Validation split.
        test (List[RenderedSample]): Test split, shared by every method.
        forgotten_user_ids (frozenset): Users whose training data is D_f.
        vocab (Vocabulary): Vocabulary used to render every split.
        domain (str): Prompt domain.

    Attributes:
        forgotten (List[RenderedSample]): D_f, in train order.
        retained (List[RenderedSample]): D_r, in train order.
    """

    def __init__(self, train, valid, test, forgotten_user_ids, vocab, domain='movies'):
        self._logger = logging.getLogger(self.__class__.__name__)
        self.train = list(train)
        self.valid = list(valid)
        self.test = list(test)
        self.forgotten_user_ids = frozenset(forgotten_user_ids)
        self.vocab = vocab
        self.domain = domain
        self.forgotten = [sample for sample in self.train if sample.user_id in self.forgotten_user_ids]
        self.retained = [sample for sample in self.train if sample.user_id not in self.forgotten_user_ids]

    def validate(self):
        """
        Check the partition invariants.

        Raises:
            PartitionError: If D_f and D_r do not partition train by user.
        """
        if len(self.forgotten) + len(self.retained) != len(self.train):
            raise PartitionError('Forgotten and retained sets do not cover train')
        if any(sample.user_id not in self.forgotten_user_ids for sample in self.forgotten):
            raise PartitionError('Forgotten set holds a retained user')
        if any(sample.user_id in self.forgotten_user_ids for sample in self.retained):
            raise PartitionError('Retained set holds a forgotten user')

    def sizes(self):
        return {'train': len(self.train), 'valid': len(self.valid), 'test': len(self.test),
                'forgotten': len(self.forgotten), 'retained': len(self.retained)}

    def __repr__(self):
        return 'DatasetBundle(%s)' % ', '.join('%s=%d' % item for item in self.sizes().items())


def build_bundle(interactions, ratios=(0.6, 0.2, 0.2), forgotten_fraction=0.2, seed=0, max_history=10,
                 max_seq_len=None, domain='movies'):
    """
    Render, split and partition an interaction log.

    The vocabulary covers every title of the full log. A sample's history is
    its user's clicks strictly earlier in global order, whatever split they
    fall in.

    Returns:
        DatasetBundle: The bundle, validated.
    """
    template = PromptTemplate(domain)
    train, valid, test = temporal_split(interactions, ratios)
    vocab = build_vocabulary((row.item_title for row in interactions), template)

    rendered = []
    for interaction, history in attach_histories(train + valid + test):
        rendered.append(render_prompt(history, interaction.item_title, vocab, template=template,
                                      max_history=max_history, max_seq_len=max_seq_len,
                                      user_id=interaction.user_id, label=interaction.label,
                                      item_id=interaction.item_id, timestamp=interaction.timestamp))

    first, second = len(train), len(train) + len(valid)
    train_samples = rendered[:first]
    _, _, forgotten_user_ids = select_forgotten_users(train_samples, forgotten_fraction, seed)

    bundle = DatasetBundle(train_samples, rendered[first:second], rendered[second:], forgotten_user_ids, vocab,
                           domain=domain)
    bundle.validate()
    _logger.info('Built %r', bundle)
    return bundle


def _file_hash(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for block in iter(lambda: handle.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def _write_jsonl(path, samples):
    with open(path, 'w', encoding='utf-8') as handle:
        for sample in samples:
            handle.write(json.dumps(sample.to_dict(), sort_keys=True) + '\n')


def _read_jsonl(path):
    with open(path, encoding='utf-8') as handle:
        return [RenderedSample.from_dict(json.loads(line)) for line in handle if line.strip()]


SPLIT_FILES = ('train.jsonl', 'valid.jsonl', 'test.jsonl')


def save_bundle(bundle, directory):
    """
    Write a bundle and a manifest of SHA-256 content hashes.

    Returns:
        dict: The manifest.
    """
    os.makedirs(directory, exist_ok=True)
    for name, samples in zip(SPLIT_FILES, (bundle.train, bundle.valid, bundle.test)):
        _write_jsonl(os.path.join(directory, name), samples)
    with open(os.path.join(directory, 'vocab.json'), 'w', encoding='utf-8') as handle:
        json.dump(bundle.vocab.to_dict(), handle, sort_keys=True)
    with open(os.path.join(directory, 'partition.json'), 'w', encoding='utf-8') as handle:
        json.dump({'forgotten_user_ids': sorted(bundle.forgotten_user_ids), 'domain': bundle.domain}, handle,
                  sort_keys=True)

    files = SPLIT_FILES + ('vocab.json', 'partition.json')
    manifest = {
        'files': {name: _file_hash(os.path.join(directory, name)) for name in files},
        'sizes': bundle.sizes(),
    }
    with open(os.path.join(directory, 'manifest.json'), 'w', encoding='utf-8') as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
    return manifest


def load_bundle(directory):
    """
    Read a bundle written by save_bundle, verifying the manifest hashes.

    Raises:
        DataError: If a file is missing or its hash does not match.
    """
    manifest_path = os.path.join(directory, 'manifest.json')
    if not os.path.isfile(manifest_path):
        raise DataError('No prepared bundle in "%s"; run prepare first' % directory)
    with open(manifest_path, encoding='utf-8') as handle:
        manifest = json.load(handle)
    for name, expected in manifest['files'].items():
        path = os.path.join(directory, name)
        if not os.path.isfile(path) or _file_hash(path) != expected:
            raise DataError('Bundle file "%s" is missing or does not match the manifest' % path)

    train, valid, test = (_read_jsonl(os.path.join(directory, name)) for name in SPLIT_FILES)
    with open(os.path.join(directory, 'vocab.json'), encoding='utf-8') as handle:
        vocab = Vocabulary.from_dict(json.load(handle))
    with open(os.path.join(directory, 'partition.json'), encoding='utf-8') as handle:
        partition = json.load(handle)
    return DatasetBundle(train, valid, test, partition['forgotten_user_ids'], vocab, domain=partition['domain'])


def dump_rendered(bundle, path):
    """Write every rendered sample with its split and prompt text as JSON lines."""
    with open(path, 'w', encoding='utf-8') as handle:
        for split in ('train', 'valid', 'test'):
            for sample in getattr(bundle, split):
                record = sample.to_dict()
                record['split'] = split
                record['forgotten'] = sample.user_id in bundle.forgotten_user_ids
                record['text'] = detokenize(sample.token_ids, bundle.vocab)
                handle.write(json.dumps(record, sort_keys=True) + '\n')
