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


class UnlearnRecError(RuntimeError):
    """Base class for every error raised by unlearnrec."""


class DimensionError(UnlearnRecError, ValueError):
    """Operand shapes are incompatible."""


class NumericError(UnlearnRecError, ValueError):
    """An operation received NaN or infinite input."""


class TargetIndexError(UnlearnRecError, IndexError):
    """A class index is outside the logits range."""


class ContractError(UnlearnRecError):
    """A caller broke a documented pre or post condition."""


class ConfigError(UnlearnRecError, ValueError):
    """A configuration value is invalid or unknown."""


class DataError(UnlearnRecError):
    """Base class for data pipeline errors."""


class SchemaError(DataError):
    """The input file does not match the expected columns."""


class ValidationError(DataError, ValueError):
    """A row of the input file holds an invalid value."""


class EmptyDatasetError(DataError):
    """An operation received no samples."""


class PartitionError(DataError):
    """The forgotten/retained partition cannot be built."""


class VocabularyError(DataError, KeyError):
    """A token or item has no slot in the vocabulary."""

    def __str__(self):
        return str(self.args[0]) if self.args else ''


class ForgottenSetError(DataError):
    """The forgotten set is empty where samples are required."""


class SequenceLengthError(UnlearnRecError, ValueError):
    """A token sequence exceeds the model context."""


class TrainingError(UnlearnRecError):
    """Training diverged."""


class CheckpointError(UnlearnRecError):
    """Base class for checkpoint I/O errors."""


class CorruptCheckpointError(CheckpointError):
    """A checkpoint file is truncated, unreadable or fails its hash."""


class UndefinedMetricError(UnlearnRecError, ValueError):
    """A metric is undefined for the given input."""


class ReportError(UnlearnRecError, ValueError):
    """A metrics report violates its invariants."""
