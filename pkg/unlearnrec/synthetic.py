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
from dataclasses import asdict, dataclass

import numpy as np

from unlearnrec.data import Interaction
from unlearnrec.exceptions import ConfigError

GENRES = ('Comedy', 'Drama', 'Horror', 'Western', 'Romance', 'Thriller', 'Mystery', 'Fantasy', 'Musical',
          'Crime', 'Adventure', 'Noir')

_logger = logging.getLogger(__name__)


@dataclass
class SyntheticConfig:
    """
    Genre click model.

    Every item belongs to one genre and every user likes genres_per_user
    genres. A user clicks an item of a liked genre with probability
    click_prob_liked, any other item with click_prob_other. Users act in
    rounds, so each user's first event comes before anyone's second one.
    """

    n_users: int = 100
    n_items: int = 200
    n_samples: int = 3334
    n_genres: int = 8
    genres_per_user: int = 2
    click_prob_liked: float = 0.85
    click_prob_other: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.n_users < 2 or self.n_items < 1:
            raise ConfigError('Synthetic data needs at least 2 users and 1 item')
        if self.n_samples < self.n_users:
            raise ConfigError('n_samples (%d) must be at least n_users (%d)' % (self.n_samples, self.n_users))
        if not 1 <= self.n_genres <= len(GENRES):
            raise ConfigError('n_genres must lie in [1, %d], got %d' % (len(GENRES), self.n_genres))
        if not 1 <= self.genres_per_user <= self.n_genres:
            raise ConfigError('genres_per_user must lie in [1, n_genres]')
        for name in ('click_prob_liked', 'click_prob_other'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError('%s must lie in [0, 1]' % name)

    def to_dict(self):
        return asdict(self)


def _title(genre, index):
    return '%s %03d' % (GENRES[genre], index)


def generate_synthetic(config=None):
    """
    Generate an interaction log from the genre click model.

    Args:
        config (SyntheticConfig): Generator settings.

    Returns:
        List[Interaction]: Interactions in time order with strictly increasing
            timestamps.
    """
    config = config or SyntheticConfig()
    rng = np.random.default_rng(config.seed)

    item_genres = rng.integers(0, config.n_genres, size=config.n_items)
    liked = [frozenset(rng.choice(config.n_genres, size=config.genres_per_user, replace=False).tolist())
             for _ in range(config.n_users)]

    per_user = np.full(config.n_users, config.n_samples // config.n_users)
    per_user[:config.n_samples % config.n_users] += 1

    interactions = []
    timestamp = 0
    for round_index in range(int(per_user.max())):
        active = np.flatnonzero(per_user > round_index)
        for user in rng.permutation(active):
            item = int(rng.integers(0, config.n_items))
            genre = int(item_genres[item])
            prob = config.click_prob_liked if genre in liked[user] else config.click_prob_other
            label = int(rng.random() < prob)
            timestamp += 1
            interactions.append(Interaction(user_id='u%04d' % (user + 1), item_id='i%04d' % (item + 1),
                                            item_title=_title(genre, item + 1), timestamp=timestamp, label=label))

    _logger.info('Generated %d synthetic interactions for %d users and %d items', len(interactions),
                 config.n_users, config.n_items)
    return interactions
