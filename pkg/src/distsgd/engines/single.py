"""Sequential single-learner SGD baseline."""

from __future__ import annotations

import numpy as np

from ..metrics import MetricsRecord, StalenessRecord, staleness_summary
from ..objectives import Dataset, Objective, epoch_minibatches, gradient, heldout_loss, initial_weights
from ..optim import LrSchedule, MomentumState, learning_rate, sgd_step
from ..runtime import Clock, DelayModel, RunAborted, VirtualClock
from .common import EngineFailure, RunResult


def run_single(
    objective: Objective,
    dataset: Dataset,
    schedule: LrSchedule,
    *,
    epochs: int,
    batch_size: int,
    seed: int,
    momentum: float = 0.9,
    delays: DelayModel | None = None,
    clock: Clock | None = None,
    init_weights: np.ndarray | None = None,
) -> RunResult:
    """Plain minibatch SGD over the seeded per-epoch shuffle; deterministic in
    the seed. Zero epochs returns the initial weights and no metrics."""
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if epochs > schedule.total_epochs:
        raise ValueError(f"epochs ({epochs}) exceeds schedule.total_epochs ({schedule.total_epochs})")
    clock = clock or VirtualClock()
    delays = delays or DelayModel()
    compute_delay = delays.compute_delay_fn(1)

    weights = init_weights.copy() if init_weights is not None else initial_weights(objective, seed)
    state = MomentumState.zeros(objective.param_dim, momentum)
    records: list[MetricsRecord] = []
    staleness = StalenessRecord("single")
    final = {"weights": weights}

    def body():
        w = weights
        for epoch in range(1, epochs + 1):
            try:
                batches = epoch_minibatches(dataset, batch_size, seed, epoch)
                t0 = clock.now()
                for k, batch in enumerate(batches):
                    d = compute_delay()
                    if d > 0:
                        clock.sleep(d)
                    g = gradient(objective, w, batch, dataset)
                    lr = learning_rate(schedule, epoch, k, len(batches))
                    w = sgd_step(w, g, lr, state)
                records.append(
                    MetricsRecord(
                        epoch=epoch,
                        heldout_loss=heldout_loss(objective, w, dataset),
                        epoch_wall_s=clock.now() - t0,
                        minibatch_counts=[len(batches)],
                        staleness_mean=0.0,
                        staleness_max=0,
                        bytes_exchanged=0,
                    )
                )
            except RunAborted:
                raise
            except Exception as exc:
                raise EngineFailure(epoch, exc) from exc
        final["weights"] = w

    clock.run([body])
    return RunResult(weights=final["weights"], records=records, trace={"staleness": staleness})
