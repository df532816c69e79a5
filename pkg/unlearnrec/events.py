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

import json
import logging


class Event:
    """
    A training milestone with a flat dict of values.

    Example:
        Record the end of an unlearning epoch:
        Event(name='unlearn_epoch', data={'epoch': 1, 'l_fgt': 0.12, 'l_rem': 0.53,
                                          'combined': 0.36, 'phi_hash': '9f3c01aa5e2b7d40'})

    Args:
        name (str): An identifier for the event.
        data Optional[dict]: JSON-serializable values.
    """

    def __init__(self, name, data=None):
        self.name = name
        self.data = {} if data is None else data

    def to_json(self):
        return json.dumps(dict(self.data, event=self.name), sort_keys=True)

    def __eq__(self, other):
        if isinstance(other, self.__class__):
            return self.__dict__ == other.__dict__
        return NotImplemented

    def __ne__(self, other):
        if isinstance(other, self.__class__):
            return not self.__eq__(other)
        return NotImplemented

    def __hash__(self):
        return hash((self.name, json.dumps(self.data, sort_keys=True)))

    def __repr__(self):
        return 'Event(name="%s", data=%r)' % (self.name, self.data)


class EventLog:
    """
    Collects events in order, logs each at INFO and optionally appends it to
    a JSON lines file.

    Args:
        path Optional[str]: File to append to.
    """

    def __init__(self, path=None):
        self._logger = logging.getLogger(self.__class__.__name__)
        self.path = path
        self.events = []

    def record(self, name, **data):
        event = Event(name=name, data=data)
        self.events.append(event)
        self._logger.info('%s %s', name, json.dumps(data, sort_keys=True))
        if self.path:
            with open(self.path, 'a', encoding='utf-8') as handle:
                handle.write(event.to_json() + '\n')
        return event

    def named(self, name):
        return [event for event in self.events if event.name == name]

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)
