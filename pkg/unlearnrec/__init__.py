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

from unlearnrec.exceptions import (CheckpointError, ConfigError, ContractError, DataError, TrainingError,  # NOQA
                                   UnlearnRecError)
from unlearnrec.model import ModelConfig, ModelParams, attach_lora, init_params  # NOQA
from unlearnrec.prompts import RenderedSample, render_prompt  # NOQA
from unlearnrec.data import DatasetBundle, Interaction, build_bundle, temporal_split  # NOQA
from unlearnrec.training import TrainConfig, train_original  # NOQA
from unlearnrec.unlearning import TeacherBundle, UnlearnConfig, unlearn_with_teachers  # NOQA
from unlearnrec.metrics import MetricsReport, evaluate_method  # NOQA

__author__ = 'Leigh McKenzie'
__copyright__ = 'Copyright 2024, Leigh McKenzie'
__email__ = 'maccarav0@gmail.com'
__license__ = 'ISCL'
__version__ = '0.1.0'

logging.getLogger(__name__).addHandler(logging.NullHandler())
