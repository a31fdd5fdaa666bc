"""Shared epoch-wide minibatch pool with an exactly-once hand-out contract.

Idle learners pull the next unclaimed minibatch, so under unequal compute
rates the per-learner batch counts settle proportional to 1/slowdown. The
hand-out is a plain lock-protected pop: it never blocks on anything else, so
it is safe in both real-thread and virtual-clock execution.
"""

from __future__ import annotations

import threading

import numpy as np


class MinibatchPool:
    def __init__(self, batches: list[np.ndarray], n_learners: int):
        self._lock = threading.Lock()
        self._batches: list[np.ndarray] = []
        self._next = 0
        self.n_learners = n_learners
        self.counts = [0] * n_learners
        self.reset(batches)

    def reset(self, batches: list[np.ndarray]) -> None:
        """Load a new epoch's batches and zero the per-learner tallies.
        Must only be called while no learner is drawing."""
        with self._lock:
            self._batches = list(batches)
            self._next = 0
            self.counts = [0] * self.n_learners

    @property
    def size(self) -> int:
        return len(self._batches)

    def next(self, learner_id: int) -> tuple[int, np.ndarray] | None:
        """Atomically claim the next minibatch; returns (position, batch) or
        None once the pool is exhausted. Each batch is handed out exactly once."""
        with self._lock:
            if self._next >= len(self._batches):
                return None
            k = self._next
            self._next += 1
            self.counts[learner_id - 1] += 1
            return k, self._batches[k]
