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
Checkpoint files.

A checkpoint is a numpy .npz archive holding one array per weight plus a
JSON header with the model config, the weight names of each group and a
64-bit content hash over every weight.
"""

import json
import logging
import os
import zipfile

import numpy as np

from unlearnrec.exceptions import CheckpointError, ConfigError, CorruptCheckpointError
from unlearnrec.model import ModelConfig, ModelParams
from unlearnrec.tensor import Tensor

HEADER_KEY = '__header__'
FORMAT_VERSION = 1

_logger = logging.getLogger(__name__)


def save_checkpoint(params, path):
    """Write params to path, returning the content hash."""
    header = {
        'format': FORMAT_VERSION,
        'config': params.config.to_dict(),
        'base': list(params.base),
        'lora': list(params.lora),
        'lora_enabled': params.lora_enabled,
        'hash': params.state_hash(),
    }
    arrays = {name: tensor.data for name, tensor in params.named_parameters()}
    arrays[HEADER_KEY] = np.frombuffer(json.dumps(header, sort_keys=True).encode('utf-8'), dtype=np.uint8)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as handle:
        np.savez(handle, **arrays)
    _logger.info('Saved checkpoint "%s" (hash %s)', path, header['hash'])
    return header['hash']


def load_checkpoint(path, expected_config=None):
    """
    Read a checkpoint written by save_checkpoint.

    Args:
        path (str): Checkpoint file.
        expected_config (ModelConfig): When given, the stored config must
            match it.

    Returns:
        ModelParams: The model in 'frozen' mode.

    Raises:
        CheckpointError: If the file does not exist.
        CorruptCheckpointError: If the file is truncated, unreadable or its
            content hash does not match.
        ConfigError: If the stored config differs from expected_config.
    """
    if not os.path.isfile(path):
        raise CheckpointError('Checkpoint "%s" not found' % path)
    try:
        with np.load(path, allow_pickle=False) as archive:
            header = json.loads(archive[HEADER_KEY].tobytes().decode('utf-8'))
            base = {name: Tensor(archive[name]) for name in header['base']}
            lora = {name: Tensor(archive[name]) for name in header['lora']}
    except (OSError, ValueError, KeyError, EOFError, zipfile.BadZipFile) as error:
        raise CorruptCheckpointError('Checkpoint "%s" is unreadable: %s' % (path, error)) from None

    config = ModelConfig.from_dict(header['config'])
    if expected_config is not None and config != expected_config:
        raise ConfigError('Checkpoint "%s" was written for a different model config' % path)

    params = ModelParams(config, base, lora, header['lora_enabled'])
    if params.state_hash() != header['hash']:
        raise CorruptCheckpointError('Checkpoint "%s" fails its content hash' % path)
    return params
