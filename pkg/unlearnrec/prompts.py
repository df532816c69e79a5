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

from dataclasses import dataclass

from unlearnrec.exceptions import ConfigError, SequenceLengthError, ValidationError, VocabularyError

PAD = '<pad>'
BOS = '<bos>'
YES = 'Yes'
NO = 'No'

PAD_ID = 0
BOS_ID = 1
YES_ID = 2
NO_ID = 3

PUNCTUATION = (':', ',', '.')

DOMAINS = {
    'movies': ('watched', 'movies', 'movie'),
    'books': ('read', 'books', 'book'),
}


class PromptTemplate:
    """
    The hard prompt that turns a user history and a candidate item into text.

    Example:
        The user watched the following movies in order: A, B. Please deduce
        if he will like the movie C.

    The history clause is left out when the history is empty.

    Args:
        domain (str): 'movies' or 'books'.

    Raises:
        ConfigError: If the domain is unknown.
    """

    def __init__(self, domain='movies'):
        if domain not in DOMAINS:
            raise ConfigError('Unknown prompt domain "%s", expected one of %s' % (domain, sorted(DOMAINS)))
        self.domain = domain
        verb, plural, singular = DOMAINS[domain]
        self.history_words = ['The', 'user', verb, 'the', 'following', plural, 'in', 'order', ':']
        self.question_words = ['Please', 'deduce', 'if', 'he', 'will', 'like', 'the', singular]

    @property
    def words(self):
        """All template words and punctuation, in first-use order."""
        words = []
        for word in self.history_words + self.question_words + list(PUNCTUATION):
            if word not in words:
                words.append(word)
        return words

    def text(self, history, candidate):
        """Render the prompt as a plain string."""
        verb, plural, singular = DOMAINS[self.domain]
        question = 'Please deduce if he will like the %s %s.' % (singular, candidate)
        if not history:
            return question
        return 'The user %s the following %s in order: %s. %s' % (verb, plural, ', '.join(history), question)

    def __repr__(self):
        return 'PromptTemplate(domain="%s")' % self.domain


class Vocabulary:
    """
    Closed word-level vocabulary.

    Reserved tokens take fixed indices: PAD 0, BOS 1, "Yes" 2, "No" 3. Template
    words follow, then one token per item title. Item tokens live in their own
    namespace, so an item titled like a template word still gets its own slot.

    Args:
        words (Iterable[str]): Template words.
        titles (Iterable[str]): Item titles.
    """

    def __init__(self, words=(), titles=()):
        self._entries = []
        self._words = {}
        self._items = {}

        for word in (PAD, BOS, YES, NO):
            self._add_word(word)
        for word in words:
            self._add_word(word)
        for title in titles:
            if title not in self._items:
                self._items[title] = len(self._entries)
                self._entries.append(('item', title))

    def _add_word(self, word):
        if word not in self._words:
            self._words[word] = len(self._entries)
            self._entries.append(('word', word))

    def word_id(self, word):
        try:
            return self._words[word]
        except KeyError:
            raise VocabularyError('Unknown word "%s"' % word) from None

    def item_id(self, title):
        try:
            return self._items[title]
        except KeyError:
            raise VocabularyError('Unknown item "%s"' % title) from None

    def has_item(self, title):
        return title in self._items

    def surface(self, index):
        """Return the text of a token index."""
        try:
            return self._entries[index][1]
        except IndexError:
            raise VocabularyError('Token index %d outside vocabulary of size %d' % (index, len(self))) from None

    def is_item(self, index):
        return self._entries[index][0] == 'item'

    def to_dict(self):
        return {
            'words': [text for kind, text in self._entries if kind == 'word'],
            'items': [text for kind, text in self._entries if kind == 'item'],
        }

    @classmethod
    def from_dict(cls, data):
        words = [word for word in data['words'] if word not in (PAD, BOS, YES, NO)]
        return cls(words=words, titles=data['items'])

    def __len__(self):
        return len(self._entries)

    def __eq__(self, other):
        if isinstance(other, self.__class__):
            return self._entries == other._entries
        return NotImplemented

    def __repr__(self):
        return 'Vocabulary(size=%d, items=%d)' % (len(self), len(self._items))


def build_vocabulary(titles, template=None):
    """
    Build the vocabulary once over every item title of the full dataset.

    Args:
        titles (Iterable[str]): Item titles, duplicates allowed.
        template (PromptTemplate): Template whose words are reserved.

    Returns:
        Vocabulary: Vocabulary with items in sorted title order.
    """
    template = template or PromptTemplate()
    return Vocabulary(words=template.words, titles=sorted(set(titles)))


@dataclass(frozen=True)
class RenderedSample:
    """
    One interaction rendered into the token sequence the recommender reads.

    token_ids starts with BOS and ends with the prompt's closing period; the
    model predicts answer_token_id at the final position.
    """

    token_ids: tuple
    answer_token_id: int
    user_id: str
    label: int
    item_id: str = ''
    timestamp: int = 0

    def to_dict(self):
        return {
            'token_ids': list(self.token_ids),
            'answer_token_id': self.answer_token_id,
            'user_id': self.user_id,
            'label': self.label,
            'item_id': self.item_id,
            'timestamp': self.timestamp,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(token_ids=tuple(data['token_ids']), answer_token_id=data['answer_token_id'],
                   user_id=data['user_id'], label=data['label'], item_id=data.get('item_id', ''),
                   timestamp=data.get('timestamp', 0))


def _encode(history, candidate, vocab, template):
    ids = [BOS_ID]
    if history:
        ids.extend(vocab.word_id(word) for word in template.history_words)
        for position, title in enumerate(history):
            if position:
                ids.append(vocab.word_id(','))
            ids.append(vocab.item_id(title))
        ids.append(vocab.word_id('.'))
    ids.extend(vocab.word_id(word) for word in template.question_words)
    ids.append(vocab.item_id(candidate))
    ids.append(vocab.word_id('.'))
    return ids


def render_prompt(user_history, candidate, vocab, template=None, max_history=10, max_seq_len=None,
                  user_id='', label=0, item_id='', timestamp=0):
    """
    Tokenize the prompt for one candidate item.

    Only the max_history most recent titles are kept. If the sequence is still
    longer than max_seq_len the oldest remaining titles are dropped until it
    fits.

    Args:
        user_history (List[str]): Titles of the user's earlier positive items,
            oldest first. May be empty.
        candidate (str): Title of the item to score.
        vocab (Vocabulary): Vocabulary built over the full dataset.
        template (PromptTemplate): Prompt template, 'movies' by default.
        max_history (int): History cap K.
        max_seq_len (int): Optional token budget.
        user_id (str): Owner of the sample.
        label (int): 1 for a click, 0 otherwise.

    Returns:
        RenderedSample: The rendered sample.

    Raises:
        VocabularyError: If a title has no vocabulary slot.
        SequenceLengthError: If even the history-free prompt exceeds max_seq_len.
    """
    if not candidate:
        raise ValidationError('Candidate title must be non-empty')
    template = template or PromptTemplate()
    history = list(user_history)[-max_history:] if max_history > 0 else []

    ids = _encode(history, candidate, vocab, template)
    while max_seq_len is not None and len(ids) > max_seq_len:
        if not history:
            raise SequenceLengthError('Prompt of %d tokens exceeds max_seq_len %d' % (len(ids), max_seq_len))
        history = history[1:]
        ids = _encode(history, candidate, vocab, template)

    answer = YES_ID if label == 1 else NO_ID
    return RenderedSample(token_ids=tuple(ids), answer_token_id=answer, user_id=user_id, label=int(label),
                          item_id=item_id, timestamp=int(timestamp))


def detokenize(token_ids, vocab):
    """
    Turn token indices back into prompt text.

    Reserved tokens are skipped and punctuation attaches to the preceding
    token, so detokenize(render_prompt(...).token_ids) reproduces
    PromptTemplate.text exactly.
    """
    pieces = []
    for index in token_ids:
        if index in (PAD_ID, BOS_ID):
            continue
        text = vocab.surface(index)
        if pieces and not vocab.is_item(index) and text in PUNCTUATION:
            pieces[-1] += text
        else:
            pieces.append(text)
    return ' '.join(pieces)
