"""Hybrid async-allreduce SGD.

Each iteration a learner (1) pulls the previous iteration's allreduce result
and divides by the learner count to get its working weights (the very first
iteration uses the initial weights), (2) computes its gradient and applies a
local update, (3) pushes the updated weights into a collective run by its
communication agent, which overlaps the next iteration's gradient work. All
learners therefore share identical working weights every iteration, one
update behind the freshest local models: steady-state staleness is exactly 1.
"""

from __future__ import annotations

import numpy as np

from ..collective import RingAllreduceGroup, make_chunk_plan
from ..metrics import MetricsRecord, StalenessRecord, staleness_summary
from ..objectives import Dataset, Objective, epoch_minibatches, gradient, heldout_loss, initial_weights
from ..optim import LrSchedule, MomentumState, learning_rate, sgd_step
from ..runtime import Clock, DelayModel, RunAborted, VirtualClock
from .common import EngineFailure, RunResult, payload_digest
from .ssgd import static_partition


def run_hybrid(
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
    """Minibatches are partitioned statically and equally (the collective is
    synchronous, so there is no pool stealing). At each epoch boundary the
    pipeline is drained for a consistent consensus model."""
    if learners < 2:
        raise ValueError(f"hybrid needs at least 2 learners, got {learners}")
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if epochs > schedule.total_epochs:
        raise ValueError(f"epochs ({epochs}) exceeds schedule.total_epochs ({schedule.total_epochs})")
    clock = clock or VirtualClock()
    delays = delays or DelayModel()

    plan = make_chunk_plan(objective.param_dim, learners, chunk_count)
    group = RingAllreduceGroup(clock, plan, delays.comm_delay_fn)
    w0 = init_weights.copy() if init_weights is not None else initial_weights(objective, seed)

    push = {i: clock.channel() for i in range(1, learners + 1)}
    pull = {i: clock.channel() for i in range(1, learners + 1)}
    report_ch = clock.channel()
    go = {i: clock.channel() for i in range(1, learners + 1)}
    records: list[MetricsRecord] = []
    staleness = StalenessRecord("hybrid")
    iterate_digests: dict[int, list[str]] = {i: [] for i in range(1, learners + 1)}
    final = {}

    def learner(i: int):
        rank = i - 1
        compute_delay = delays.compute_delay_fn(i)

        def body():
            working = w0.copy()
            state = MomentumState.zeros(objective.param_dim, momentum)
            first_update = True
            pending = False
            stagger = delays.initial_stagger(i)
            if stagger > 0:
                clock.sleep(stagger)
            for epoch in range(1, epochs + 1):
                try:
                    mine = static_partition(
                        epoch_minibatches(dataset, batch_size, seed, epoch), learners
                    )[rank]
                    samples = []
                    for k, batch in enumerate(mine):
                        if pending:
                            working = pull[i].get() / learners
                            pending = False
                        # Every pull returns a consensus that trails the
                        # freshest local update by one pipeline stage.
                        samples.append(0 if first_update else 1)
                        first_update = False
                        if record_iterates:
                            iterate_digests[i].append(payload_digest(working))
                        d = compute_delay()
                        if d > 0:
                            clock.sleep(d)
                        g = gradient(objective, working, batch, dataset)
                        lr = learning_rate(schedule, epoch, k, len(mine))
                        updated = sgd_step(working, g, lr, state)
                        push[i].put(updated)
                        pending = True
                    # Drain the pipeline: the epoch ends on a consensus model,
                    # which doubles as the next epoch's first working weights.
                    working = pull[i].get() / learners
                    pending = False
                except RunAborted:
                    raise
                except Exception as exc:
                    raise EngineFailure(epoch, exc) from exc
                report_ch.put((i, working.copy(), len(mine), samples))
                go[i].get()
            push[i].put(None)
            final[i] = working

        return body

    def agent(i: int):
        rank = i - 1

        def body():
            while True:
                item = push[i].get()
                if item is None:
                    return
                pull[i].put(group.allreduce(rank, item))

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

    actors = []
    for i in range(1, learners + 1):
        actors.append(learner(i))
        actors.append(agent(i))
    actors.append(orchestrator)
    clock.run(actors)
    weights = final.get(1, w0)
    return RunResult(
        weights=weights,
        records=records,
        trace={
            "staleness": staleness,
            "staleness_by_learner": staleness_by_learner,
            "iterate_digests": iterate_digests,
        },
    )
