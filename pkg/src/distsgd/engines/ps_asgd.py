"""Asynchronous parameter-server SGD.

A server actor holds the authoritative weights with a scalar timestamp.
Learners loop {pull weights+timestamp, compute a gradient, push}; the server
applies every received gradient immediately, in arrival order, with no
staleness compensation. The staleness sample of an update is the server
timestamp at application minus the timestamp the learner pulled.
"""

from __future__ import annotations

import numpy as np

from ..metrics import MetricsRecord, StalenessRecord, staleness_summary
from ..objectives import Dataset, Objective, epoch_minibatches, gradient, heldout_loss, initial_weights
from ..optim import LrSchedule, MomentumState, learning_rate, sgd_step
from ..pool import MinibatchPool
from ..runtime import Clock, DelayModel, RunAborted, VirtualClock
from .common import EngineAborted, EngineFailure, RunResult


class ServerShutdown(RuntimeError):
    """Injected server failure (testing hook for mid-run aborts)."""


def run_ps_asgd(
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
    server_fail_after: int | None = None,
    init_weights: np.ndarray | None = None,
) -> RunResult:
    """With one learner there is no concurrency: staleness is identically 0
    and the trajectory reproduces the single-learner baseline. Mean staleness
    grows with the learner count. ``server_fail_after`` kills the server after
    that many applied updates; the run then aborts cleanly with the metrics of
    the epochs completed so far attached to the raised :class:`EngineAborted`.
    """
    if learners < 1:
        raise ValueError(f"ps-asgd needs at least 1 learner, got {learners}")
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if epochs > schedule.total_epochs:
        raise ValueError(f"epochs ({epochs}) exceeds schedule.total_epochs ({schedule.total_epochs})")
    clock = clock or VirtualClock()
    delays = delays or DelayModel()

    pool = MinibatchPool(epoch_minibatches(dataset, batch_size, seed, 1) if epochs else [], learners)
    req_ch = clock.channel()
    reply = {i: clock.channel(delays.comm_delay_fn(i)) for i in range(1, learners + 1)}
    records: list[MetricsRecord] = []
    staleness = StalenessRecord("ps-asgd")
    payload_bytes = objective.param_dim * 8
    final = {}

    def learner(i: int):
        compute_delay = delays.compute_delay_fn(i)

        def body():
            stagger = delays.initial_stagger(i)
            if stagger > 0:
                clock.sleep(stagger)
            epoch = 1
            while epoch <= epochs:
                drawn = pool.next(i)
                if drawn is None:
                    req_ch.put(("done", i, None, None))
                    msg = reply[i].get()
                    if msg[0] == "stop":
                        return
                    epoch += 1
                    continue
                k, batch = drawn
                req_ch.put(("pull", i, None, None))
                _, weights, ts = reply[i].get()
                clock.sleep(compute_delay())  # always yield (fairness)
                g = gradient(objective, weights, batch, dataset)
                req_ch.put(("push", i, g, ts))
            # epochs == 0: nothing to do

        return body

    def server():
        weights = init_weights.copy() if init_weights is not None else initial_weights(objective, seed)
        state = MomentumState.zeros(objective.param_dim, momentum)
        timestamp = 0
        applied_total = 0
        try:
            for epoch in range(1, epochs + 1):
                try:
                    pool_size = pool.size
                    samples: list[int] = []
                    bytes_moved = 0
                    done = 0
                    applied_in_epoch = 0
                    t0 = clock.now()
                    while done < learners:
                        kind, i, payload, pulled_ts = req_ch.get()
                        if kind == "pull":
                            reply[i].put(("weights", weights.copy(), timestamp))
                            bytes_moved += payload_bytes
                        elif kind == "push":
                            lr = learning_rate(schedule, epoch, applied_in_epoch, pool_size)
                            weights = sgd_step(weights, payload, lr, state)
                            samples.append(timestamp - pulled_ts)
                            timestamp += 1
                            applied_in_epoch += 1
                            applied_total += 1
                            bytes_moved += payload_bytes
                            if server_fail_after is not None and applied_total >= server_fail_after:
                                raise ServerShutdown(
                                    f"server failed after {applied_total} updates"
                                )
                        else:  # done
                            done += 1
                    staleness.samples.extend(samples)
                    mean, mx = staleness_summary(samples)
                    records.append(
                        MetricsRecord(
                            epoch=epoch,
                            heldout_loss=heldout_loss(objective, weights, dataset),
                            epoch_wall_s=clock.now() - t0,
                            minibatch_counts=pool.counts.copy(),
                            staleness_mean=mean,
                            staleness_max=mx,
                            bytes_exchanged=bytes_moved,
                        )
                    )
                except (ServerShutdown, RunAborted):
                    raise
                except Exception as exc:
                    raise EngineFailure(epoch, exc) from exc
                if epoch < epochs:
                    pool.reset(epoch_minibatches(dataset, batch_size, seed, epoch + 1))
                    for i in range(1, learners + 1):
                        reply[i].put(("go", None, None))
                else:
                    for i in range(1, learners + 1):
                        reply[i].put(("stop", None, None))
        finally:
            final["weights"] = weights

    try:
        clock.run([learner(i) for i in range(1, learners + 1)] + [server])
    except ServerShutdown as exc:
        raise EngineAborted(str(exc), records) from exc
    return RunResult(weights=final["weights"], records=records, trace={"staleness": staleness})
