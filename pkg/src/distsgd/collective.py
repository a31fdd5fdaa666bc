"""Chunked, pipelined ring allreduce with a sequential-reduction oracle.

The vector is cut into contiguous chunks; chunk ``j`` is owned by participant
``j % world``. A reduce-scatter of ``world - 1`` phases walks each chunk once
around the ring accumulating partial sums, then an allgather of another
``world - 1`` phases distributes the finished chunks. Within a chunk the
summation order is always the canonical ring order starting at the chunk's
owner, and each chunk's total is computed exactly once, so results are
bit-identical on every participant and independent of message timing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .runtime import Clock, VirtualClock


@dataclass(frozen=True)
class ChunkPlan:
    """Deterministic chunking shared by all participants of a group."""

    world: int
    dim: int
    bounds: tuple[tuple[int, int], ...]  # contiguous [start, end) per chunk

    @property
    def chunk_count(self) -> int:
        return len(self.bounds)

    def owner(self, chunk: int) -> int:
        return chunk % self.world

    def chunks_of(self, rank: int) -> list[int]:
        return [j for j in range(self.chunk_count) if j % self.world == rank]


def make_chunk_plan(dim: int, world: int, chunk_count: int | None = None) -> ChunkPlan:
    """Derive the plan from (dim, world); every participant gets the same one.

    Defaults to one chunk per participant. All chunks share the same ceiling
    size except the last, which may be shorter (or empty for tiny vectors);
    payloads are never zero-padded.
    """
    if world < 2:
        raise ValueError(f"ring allreduce needs at least 2 participants, got {world}")
    if dim < 1:
        raise ValueError(f"vector dim must be >= 1, got {dim}")
    chunk_count = world if chunk_count is None else chunk_count
    if chunk_count < world:
        raise ValueError(f"chunk_count ({chunk_count}) must be >= world ({world})")
    size = -(-dim // chunk_count)  # ceil division
    bounds = tuple((min(j * size, dim), min((j + 1) * size, dim)) for j in range(chunk_count))
    return ChunkPlan(world=world, dim=dim, bounds=bounds)


def transfer_phase_count(world: int) -> int:
    """Communication phases of a ring allreduce: (world-1) reduce-scatter
    steps plus (world-1) allgather steps."""
    if world < 2:
        raise ValueError(f"ring allreduce needs at least 2 participants, got {world}")
    return 2 * (world - 1)


def sequential_reduce(inputs: list[np.ndarray]) -> np.ndarray:
    """Left-to-right elementwise sum in participant-index order (oracle)."""
    if not inputs:
        raise ValueError("sequential_reduce needs at least one input vector")
    dim = inputs[0].shape
    out = inputs[0].astype(np.float64).copy()
    for v in inputs[1:]:
        if v.shape != dim:
            raise ValueError(f"dim mismatch in reduce inputs: {v.shape} vs {dim}")
        out = out + v
    return out


class RingAllreduceGroup:
    """A reusable collective over ``world`` participant threads.

    ``allreduce(rank, vec)`` is a collective call: every rank must enter it;
    each blocks until its own result is complete. Successive collectives on
    the group are sequenced by a generation counter carried on every message,
    so concurrently-issued iterations cannot interleave. Per-rank phase and
    byte counters are queryable for tests and metrics.
    """

    def __init__(self, clock: Clock, plan: ChunkPlan,
                 delay_fn_for_edge: Callable[[int], Callable[[], float] | None] | None = None):
        self.plan = plan
        self.world = plan.world
        # inbox[r] receives only from rank (r-1) % world.
        self._inbox = [
            clock.channel(delay_fn_for_edge(r) if delay_fn_for_edge else None)
            for r in range(self.world)
        ]
        self._generation = [0] * self.world
        self.phases = [0] * self.world
        self.bytes_sent = [0] * self.world

    def reset_counters(self) -> None:
        self.phases = [0] * self.world
        self.bytes_sent = [0] * self.world

    def _send(self, rank: int, gen: int, phase: int, chunk: int, payload: np.ndarray) -> None:
        self._inbox[(rank + 1) % self.world].put((gen, phase, chunk, payload))
        self.bytes_sent[rank] += payload.nbytes

    def _recv(self, rank: int, gen: int, phase: int, chunk: int) -> np.ndarray:
        got_gen, got_phase, got_chunk, payload = self._inbox[rank].get()
        if (got_gen, got_phase, got_chunk) != (gen, phase, chunk):
            raise RuntimeError(
                f"collective protocol violation at rank {rank}: expected "
                f"(gen={gen}, phase={phase}, chunk={chunk}), got "
                f"(gen={got_gen}, phase={got_phase}, chunk={got_chunk})"
            )
        return payload

    def allreduce(self, rank: int, vec: np.ndarray) -> np.ndarray:
        plan = self.plan
        if vec.ndim != 1 or vec.shape[0] != plan.dim:
            raise ValueError(f"rank {rank}: vector shape {vec.shape} does not match plan dim {plan.dim}")
        gen = self._generation[rank]
        self._generation[rank] += 1

        work = vec.astype(np.float64).copy()
        w = self.world
        phase = 0

        # Reduce-scatter: at step s, send the stripe owned by (rank - s),
        # receive and accumulate the stripe owned by (rank - s - 1). Incoming
        # partials arrive in ring order from each chunk's owner, so the
        # accumulation (incoming + local) keeps the canonical order.
        for s in range(w - 1):
            send_owner = (rank - s) % w
            recv_owner = (rank - s - 1) % w
            for j in plan.chunks_of(send_owner):
                lo, hi = plan.bounds[j]
                self._send(rank, gen, phase, j, work[lo:hi].copy())
            for j in plan.chunks_of(recv_owner):
                lo, hi = plan.bounds[j]
                work[lo:hi] = self._recv(rank, gen, phase, j) + work[lo:hi]
            self.phases[rank] += 1
            phase += 1

        # Allgather: rank now holds the finished stripe owned by (rank + 1);
        # circulate finished stripes, replacing local contents.
        for s in range(w - 1):
            send_owner = (rank + 1 - s) % w
            recv_owner = (rank - s) % w
            for j in plan.chunks_of(send_owner):
                lo, hi = plan.bounds[j]
                self._send(rank, gen, phase, j, work[lo:hi].copy())
            for j in plan.chunks_of(recv_owner):
                lo, hi = plan.bounds[j]
                work[lo:hi] = self._recv(rank, gen, phase, j)
            self.phases[rank] += 1
            phase += 1

        return work


def ring_allreduce(
    inputs: list[np.ndarray],
    chunk_count: int | None = None,
    clock: Clock | None = None,
    delay_fn_for_edge: Callable[[int], Callable[[], float] | None] | None = None,
) -> list[np.ndarray]:
    """Run one allreduce over ``len(inputs)`` participants and return every
    participant's result (all bit-identical elementwise sums).

    A deterministic virtual clock drives the exchange unless one is supplied.
    """
    world = len(inputs)
    if world < 2:
        raise ValueError(f"ring allreduce needs at least 2 participants, got {world}")
    dims = {v.shape for v in inputs}
    if len(dims) != 1:
        raise ValueError(f"input dim mismatch across participants: {sorted(dims)}")
    plan = make_chunk_plan(inputs[0].shape[0], world, chunk_count)
    clock = clock or VirtualClock()
    group = RingAllreduceGroup(clock, plan, delay_fn_for_edge)
    results: list[np.ndarray | None] = [None] * world

    def participant(rank: int):
        def body():
            results[rank] = group.allreduce(rank, inputs[rank])

        return body

    clock.run([participant(r) for r in range(world)])
    return results  # type: ignore[return-value]
