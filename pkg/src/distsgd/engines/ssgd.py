"""Synchronous data-parallel SGD: per-iteration gradient averaging over a
ring allreduce, all learners applying the identical update in lockstep."""

from __future__ import annotations

import numpy as np

from ..collective import RingAllreduceGroup, make_chunk_plan
from ..metrics import MetricsRecord, StalenessRecord, staleness_summary
from ..objectives import Dataset, Objective, epoch_minibatches, gradient, heldout_loss, initial_weights
from ..optim import LrSchedule, MomentumState, learning_rate, sgd_step
from ..runtime import Clock, DelayModel, RunAborted, VirtualClock
from .common import EngineFailure, RunResult, payload_digest


def static_partition(batches: list[np.ndarray], learners: int) -> list[list[np.ndarray]]:
    """Round-robin split of the epoch pool in order: at iteration k learner i
    works on batch k*learners + (i-1). The pool is truncated to a whole number
    of iterations so every learner sees the same count (lockstep collectives)."""
    q = len(batches) // learners
    if q == 0:
        raise ValueError(
            f"epoch pool of {len(batches)} minibatches cannot feed {learners} learners"
        )
    return [[batches[k * learners + i] for k in range(q)] for i in range(learners)]


def run_ssgd(
    objective: Objective,
    dataset: Dataset,
    schedule: LrSchedule,
    *,
    learners: int,
    epochs: int,
    batch_size: int,
    seed: int,
    momentum: float = 0.9,
    delays: DelayModel | None = None,
    clock: Clock | None = None,
    chunk_count: int | None = None,
    record_iterates: bool = False,
    init_weights: np.ndarray | None = None,
) -> RunResult:
    """All weight vectors are bit-identical at every iteration boundary and
    the recorded staleness is identically zero."""
    if learners < 2:
        raise ValueError(f"ssgd needs at least 2 learners, got {learners}")
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if epochs > schedule.total_epochs:
        raise ValueError(f"epochs ({epochs}) exceeds schedule.total_epochs ({schedule.total_epochs})")
    clock = clock or VirtualClock()
    delays = delays or DelayModel()

    plan = make_chunk_plan(objective.param_dim, learners, chunk_count)
    group = RingAllreduceGroup(clock, plan, delays.comm_delay_fn)
    w0 = init_weights.copy() if init_weights is not None else initial_weights(objective, seed)

    report_ch = clock.channel()
    go = {i: clock.channel() for i in range(1, learners + 1)}
    records: list[MetricsRecord] = []
    staleness = StalenessRecord("ssgd")
    iterate_digests: dict[int, list[str]] = {i: [] for i in range(1, learners + 1)}
    final = {}

    def learner(i: int):
        rank = i - 1
        compute_delay = delays.compute_delay_fn(i)

        def body():
            w = w0.copy()
            state = MomentumState.zeros(objective.param_dim, momentum)
            stagger = delays.initial_stagger(i)
            if stagger > 0:
                clock.sleep(stagger)
            for epoch in range(1, epochs + 1):
                try:
                    mine = static_partition(epoch_minibatches(dataset, batch_size, seed, epoch), learners)[rank]
                    samples = []
                    for k, batch in enumerate(mine):
                        d = compute_delay()
                        if d > 0:
                            clock.sleep(d)
                        g = gradient(objective, w, batch, dataset)
                        g_mean = group.allreduce(rank, g) / learners
                        lr = learning_rate(schedule, epoch, k, len(mine))
                        w = sgd_step(w, g_mean, lr, state)
                        samples.append(0)  # lockstep: weights are never stale
                        if record_iterates:
                            iterate_digests[i].append(payload_digest(w))
                except RunAborted:
                    raise
                except Exception as exc:
                    raise EngineFailure(epoch, exc) from exc
                report_ch.put((i, w.copy(), len(mine), samples))
                go[i].get()
            final[i] = w

        return body

    staleness_by_learner: dict[int, list[int]] = {i: [] for i in range(1, learners + 1)}

    def orchestrator():
        t0 = clock.now()
        for epoch in range(1, epochs + 1):
            reports = {}
            for _ in range(learners):
                i, w, count, samples = report_ch.get()
                reports[i] = (w, count, samples)
                staleness_by_learner[i].extend(samples)
            wall = clock.now() - t0
            all_samples = [s for i in sorted(reports) for s in reports[i][2]]
            staleness.samples.extend(all_samples)
            mean, mx = staleness_summary(all_samples)
            records.append(
                MetricsRecord(
                    epoch=epoch,
                    heldout_loss=heldout_loss(objective, reports[1][0], dataset),
                    epoch_wall_s=wall,
                    minibatch_counts=[reports[i][1] for i in sorted(reports)],
                    staleness_mean=mean,
                    staleness_max=mx,
                    bytes_exchanged=sum(group.bytes_sent),
                )
            )
            group.reset_counters()
            for i in range(1, learners + 1):
                go[i].put(True)
            t0 = clock.now()

    clock.run([learner(i) for i in range(1, learners + 1)] + [orchestrator])
    weights = final[1]
    return RunResult(
        weights=weights,
        records=records,
        trace={
            "staleness": staleness,
            "staleness_by_learner": staleness_by_learner,
            "iterate_digests": iterate_digests,
        },
    )
