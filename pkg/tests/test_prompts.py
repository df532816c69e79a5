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

from unlearnrec.exceptions import ConfigError, SequenceLengthError, VocabularyError
from unlearnrec.prompts import (BOS_ID, NO_ID, YES_ID, PromptTemplate, RenderedSample, Vocabulary, build_vocabulary,
                                detokenize, render_prompt)

TITLES = ['Heat', 'Alien', 'Fargo', 'Brazil', 'Casablanca']


@pytest.fixture
def vocab():
    return build_vocabulary(TITLES)


class TestVocabulary:
    def test_reserved_indices(self, vocab):
        assert vocab.word_id('<pad>') == 0
        assert vocab.word_id('<bos>') == BOS_ID
        assert vocab.word_id('Yes') == YES_ID
        assert vocab.word_id('No') == NO_ID

    def test_items_sorted_after_words(self, vocab):
        ids = [vocab.item_id(title) for title in sorted(TITLES)]
        assert ids == sorted(ids)
        assert ids[0] == len(vocab) - len(TITLES)

    def test_item_titled_like_a_word(self):
        vocab = build_vocabulary(['the'])
        assert vocab.item_id('the') != vocab.word_id('the')

    def test_unknown_item(self, vocab):
        with pytest.raises(VocabularyError):
            vocab.item_id('Solaris')

    def test_dict_round_trip(self, vocab):
        assert Vocabulary.from_dict(vocab.to_dict()) == vocab


class TestRenderPrompt:
    def test_detokenize_reproduces_template(self, vocab):
        sample = render_prompt(['Heat', 'Alien'], 'Fargo', vocab, label=1)
        expected = PromptTemplate().text(['Heat', 'Alien'], 'Fargo')
        assert detokenize(sample.token_ids, vocab) == expected
        assert expected == ('The user watched the following movies in order: Heat, Alien. '
                            'Please deduce if he will like the movie Fargo.')

    def test_empty_history_drops_clause(self, vocab):
        sample = render_prompt([], 'Heat', vocab)
        assert detokenize(sample.token_ids, vocab) == 'Please deduce if he will like the movie Heat.'

    def test_starts_with_bos_and_answers(self, vocab):
        clicked = render_prompt(['Heat'], 'Alien', vocab, label=1)
        skipped = render_prompt(['Heat'], 'Alien', vocab, label=0)
        assert clicked.token_ids[0] == BOS_ID
        assert clicked.answer_token_id == YES_ID
        assert skipped.answer_token_id == NO_ID
        assert clicked.token_ids == skipped.token_ids

    def test_history_cap_keeps_most_recent(self, vocab):
        sample = render_prompt(['Heat', 'Alien', 'Fargo', 'Brazil'], 'Casablanca', vocab, max_history=2)
        assert 'Fargo, Brazil.' in detokenize(sample.token_ids, vocab)
        assert 'Heat' not in detokenize(sample.token_ids, vocab)

    def test_length_budget_drops_oldest(self, vocab):
        full = render_prompt(['Heat', 'Alien', 'Fargo'], 'Brazil', vocab)
        trimmed = render_prompt(['Heat', 'Alien', 'Fargo'], 'Brazil', vocab, max_seq_len=len(full.token_ids) - 1)
        assert len(trimmed.token_ids) <= len(full.token_ids) - 1
        assert trimmed.token_ids == render_prompt(['Alien', 'Fargo'], 'Brazil', vocab).token_ids

    def test_length_budget_too_small(self, vocab):
        with pytest.raises(SequenceLengthError):
            render_prompt([], 'Heat', vocab, max_seq_len=5)

    def test_books_domain(self):
        template = PromptTemplate('books')
        vocab = build_vocabulary(TITLES, template)
        sample = render_prompt(['Heat'], 'Alien', vocab, template=template)
        assert detokenize(sample.token_ids, vocab).startswith('The user read the following books')

    def test_unknown_domain(self):
        with pytest.raises(ConfigError):
            PromptTemplate('games')

    def test_sample_dict_round_trip(self, vocab):
        sample = render_prompt(['Heat'], 'Alien', vocab, user_id='u1', label=1, item_id='i2', timestamp=9)
        assert RenderedSample.from_dict(sample.to_dict()) == sample
