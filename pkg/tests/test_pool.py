import threading
from collections import Counter

import numpy as np
import pytest

from distsgd import MinibatchPool


def _batches(n):
    return [np.array([i]) for i in range(n)]


def test_single_consumer_gets_batches_in_order_then_exhausted():
    pool = MinibatchPool(_batches(10), n_learners=1)
    seen = []
    while (drawn := pool.next(1)) is not None:
        k, batch = drawn
        seen.append((k, int(batch[0])))
    assert seen == [(i, i) for i in range(10)]
    assert pool.next(1) is None
    assert pool.counts == [10]


def test_empty_pool_exhausted_immediately():
    pool = MinibatchPool([], n_learners=2)
    assert pool.next(1) is None
    assert pool.next(2) is None


def test_concurrent_consumers_exactly_once():
    for trial in range(200):
        pool = MinibatchPool(_batches(100), n_learners=4)
        taken = [[] for _ in range(4)]

        def consume(slot):
            while (drawn := pool.next(slot + 1)) is not None:
                taken[slot].append(int(drawn[1][0]))

        threads = [threading.Thread(target=consume, args=(s,)) for s in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        merged = Counter(x for sub in taken for x in sub)
        assert merged == Counter(range(100))  # no loss, no duplication
        assert sum(pool.counts) == 100


def test_reset_reloads_and_zeroes_tallies():
    pool = MinibatchPool(_batches(3), n_learners=2)
    pool.next(1)
    pool.reset(_batches(5))
    assert pool.size == 5
    assert pool.counts == [0, 0]
    k, batch = pool.next(2)
    assert k == 0 and int(batch[0]) == 0
