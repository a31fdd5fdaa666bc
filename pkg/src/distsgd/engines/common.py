"""Shared machinery for learner engines: ring topology, checksummed weight
messages, run results, and error types."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..metrics import MetricsRecord

SENDER, RECEIVER = "sender", "receiver"


class ChecksumError(RuntimeError):
    """A received weight payload failed integrity validation, indicating a
    torn snapshot (weights mutated outside their atomic region)."""


class EngineFailure(RuntimeError):
    """Engine error annotated with the epoch in which it occurred."""

    def __init__(self, epoch: int, cause: BaseException):
        super().__init__(f"epoch {epoch}: {cause}")
        self.epoch = epoch
        self.cause = cause


class EngineAborted(RuntimeError):
    """Clean mid-run abort; carries the metrics collected so far."""

    def __init__(self, message: str, records: list[MetricsRecord]):
        super().__init__(message)
        self.records = records


@dataclass(frozen=True)
class Topology:
    """Ring of learners 1..n with parity roles: odd ids send, even ids receive.

    Every communication edge joins a sender and a receiver (the parity sets
    bipartition the ring), so pairwise engagement is acyclic and deadlock-free.
    A sender alternates between its two ring neighbors iteration by iteration.
    """

    n_learners: int

    def __post_init__(self):
        if self.n_learners < 2 or self.n_learners % 2 != 0:
            raise ValueError(
                f"ring topology needs an even learner count >= 2, got {self.n_learners}"
            )

    def role(self, learner_id: int) -> str:
        return SENDER if learner_id % 2 == 1 else RECEIVER

    def left(self, learner_id: int) -> int:
        return self.n_learners if learner_id == 1 else learner_id - 1

    def right(self, learner_id: int) -> int:
        return 1 if learner_id == self.n_learners else learner_id + 1

    def partner(self, sender_id: int, iteration: int) -> int:
        """Neighbor a sender engages at its 1-based local iteration: right on
        odd iterations, left on even ones."""
        if self.role(sender_id) != SENDER:
            raise ValueError(f"learner {sender_id} is not a sender")
        return self.right(sender_id) if iteration % 2 == 1 else self.left(sender_id)

    def senders(self) -> list[int]:
        return list(range(1, self.n_learners + 1, 2))

    def receivers(self) -> list[int]:
        return list(range(2, self.n_learners + 1, 2))


def payload_digest(weights: np.ndarray) -> str:
    return hashlib.blake2b(weights.tobytes(), digest_size=16).hexdigest()


@dataclass(frozen=True)
class WeightMessage:
    """Timestamped, checksummed weight payload exchanged between learners."""

    origin: int
    timestamp: int
    payload: np.ndarray
    checksum: str

    @classmethod
    def snapshot(cls, origin: int, timestamp: int, live_weights: np.ndarray) -> "WeightMessage":
        """Copy the weights and digest the live array separately; a mutation
        racing the snapshot (an atomicity violation) makes the two disagree."""
        payload = live_weights.copy()
        return cls(origin=origin, timestamp=timestamp, payload=payload,
                   checksum=payload_digest(live_weights))

    def validate(self) -> None:
        if payload_digest(self.payload) != self.checksum:
            raise ChecksumError(
                f"weight payload from learner {self.origin} (t={self.timestamp}) "
                f"failed checksum validation: torn snapshot"
            )


@dataclass
class RunResult:
    """Final weights plus the per-epoch metrics series; ``trace`` holds
    optional diagnostics (iterate digests, staleness samples, exchange logs)."""

    weights: np.ndarray
    records: list[MetricsRecord]
    trace: dict = field(default_factory=dict)
