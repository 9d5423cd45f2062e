import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

SCRIPT_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src', 'Scripts',
                          'confidential_truth')
sys.path.insert(0, SCRIPT_DIR)

import dealer
import ring_fixed as rf
import sharing
import transport
from protocols import MpcContext


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: acceptance-scale runs that take minutes')


class PartyPair(object):
    """Two loopback contexts sharing a seeded dealer, and helpers to run one function on both."""

    def __init__(self, params=rf.DEFAULT_PARAMS, truncation='dealer', newton=None, seed=1234):
        self.params = params
        self.rng = sharing.make_rng(seed + 1)
        channels = transport.LoopbackChannel.pair(params, timeout=60)
        self.contexts = [MpcContext(p, ch, dealer.SeededDealer(p, seed, params), params, newton, truncation)
                         for p, ch in zip((1, 2), channels)]

    def split(self, values, encoded=False):
        ring = np.asarray(values, dtype=np.uint64) if encoded else rf.encode(values, self.params)
        return sharing.split(ring, self.rng, self.params)

    def run(self, fn, *secrets, encoded=False):
        """Split every secret, call fn(ctx, *shares) on both parties, return both results."""
        split = [self.split(s, encoded) for s in secrets]

        def strand(i):
            ctx = self.contexts[i]
            try:
                return fn(ctx, *[pair[i] for pair in split])
            except Exception:
                ctx.channel.close()
                raise

        with ThreadPoolExecutor(max_workers=2) as pool:
            futures = [pool.submit(strand, i) for i in (0, 1)]
            return [f.result() for f in futures]

    def reveal(self, fn, *secrets, encoded=False):
        """Like run, but reconstructs (and decodes) the outputs. Tuples are revealed elementwise."""
        out1, out2 = self.run(fn, *secrets, encoded=encoded)
        if isinstance(out1, tuple):
            return tuple(rf.decode(sharing.reconstruct(a, b), self.params) for a, b in zip(out1, out2))
        return rf.decode(sharing.reconstruct(out1, out2), self.params)

    @property
    def stats(self):
        return self.contexts[0].channel.stats

    @property
    def counters(self):
        return self.contexts[0].counters


@pytest.fixture
def pair():
    return PartyPair()


@pytest.fixture
def make_pair():
    return PartyPair
