"""Experiment orchestration: run configuration, strategy dispatch, straggler
sweeps, and held-out evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .engines import run_adpsgd, run_hybrid, run_ps_asgd, run_single, run_ssgd
from .engines.common import RunResult
from .metrics import MetricsRecord
from .objectives import (
    Dataset,
    Objective,
    heldout_loss,
    make_dataset,
    make_objective,
)
from .optim import LrSchedule
from .runtime import DelayModel, make_clock

STRATEGIES = ("single", "ssgd", "ps-asgd", "adpsgd", "hybrid")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one experiment.

    Slowdown factors are >= 1 and default to 1 for unlisted learners; the base
    compute delay is the simulated per-minibatch compute time in milliseconds.
    With the virtual clock all timing flows from the injected delays, so two
    runs of the same config produce identical reports.
    """

    strategy: str
    learners: int
    obj_kind: str
    input_dim: int
    schedule: LrSchedule
    epochs: int
    batch_size: int
    seed: int
    n_samples: int = 1000
    hidden_dim: int = 16
    regularization: float | None = None
    momentum: float = 0.9
    stragglers: dict[int, float] = field(default_factory=dict)
    base_compute_ms: float = 0.0
    compute_jitter_ms: float = 0.0
    comm_latency_ms: float = 0.0
    comm_jitter_ms: float = 0.0
    stagger_ms: float = 0.0
    clock: str = "virtual"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if self.learners < 1:
            raise ValueError(f"learners must be >= 1, got {self.learners}")
        if self.strategy == "adpsgd" and (self.learners < 2 or self.learners % 2):
            raise ValueError(
                f"strategy adpsgd needs an even learner count >= 2, got {self.learners}"
            )
        if self.strategy in ("ssgd", "hybrid") and self.learners < 2:
            raise ValueError(f"strategy {self.strategy} needs >= 2 learners, got {self.learners}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        for learner, s in self.stragglers.items():
            if not 1 <= learner <= self.learners:
                raise ValueError(f"straggler map names learner {learner} outside 1..{self.learners}")
            if s < 1.0:
                raise ValueError(f"slowdown factor must be >= 1, got {s} for learner {learner}")
        for name in ("base_compute_ms", "compute_jitter_ms", "comm_latency_ms",
                     "comm_jitter_ms", "stagger_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.clock not in ("virtual", "real"):
            raise ValueError(f"clock must be 'virtual' or 'real', got {self.clock!r}")

    def delay_model(self) -> DelayModel:
        return DelayModel(
            base_compute_s=self.base_compute_ms / 1e3,
            slowdowns=dict(self.stragglers),
            compute_jitter_s=self.compute_jitter_ms / 1e3,
            comm_latency_s=self.comm_latency_ms / 1e3,
            comm_jitter_s=self.comm_jitter_ms / 1e3,
            stagger_s=self.stagger_ms / 1e3,
            jitter_seed=self.seed,
        )

    def build_problem(self) -> tuple[Objective, Dataset]:
        obj = make_objective(self.obj_kind, self.input_dim, self.hidden_dim, self.regularization)
        data = make_dataset(self.obj_kind, self.n_samples, self.input_dim, self.seed)
        return obj, data


def run_experiment(config: RunConfig) -> list[MetricsRecord]:
    """Dispatch to the configured engine and return its per-epoch metrics."""
    return run_experiment_full(config).records


def run_experiment_full(config: RunConfig) -> RunResult:
    obj, data = config.build_problem()
    clock = make_clock(config.clock)
    delays = config.delay_model()
    kwargs = dict(
        epochs=config.epochs,
        batch_size=config.batch_size,
        seed=config.seed,
        momentum=config.momentum,
        delays=delays,
        clock=clock,
    )
    if config.strategy == "single":
        return run_single(obj, data, config.schedule, **kwargs)
    if config.strategy == "ssgd":
        return run_ssgd(obj, data, config.schedule, learners=config.learners, **kwargs)
    if config.strategy == "ps-asgd":
        return run_ps_asgd(obj, data, config.schedule, learners=config.learners, **kwargs)
    if config.strategy == "adpsgd":
        return run_adpsgd(obj, data, config.schedule, learners=config.learners, **kwargs)
    return run_hybrid(obj, data, config.schedule, learners=config.learners, **kwargs)


def evaluate_heldout(obj: Objective, data: Dataset, weights: np.ndarray) -> float:
    """Mean loss over the held-out split, full pass, no regularization term.
    Deterministic: identical inputs give bit-identical values."""
    return heldout_loss(obj, weights, data)


@dataclass(frozen=True)
class StragglerRow:
    slowdown: float
    epoch_time_s: float
    speedup: float


def measure_straggler_degradation(config: RunConfig, factors: list[float]) -> list[StragglerRow]:
    """Run the config once per slowdown factor applied to learner 1 and report
    mean epoch wall time plus speedup against a single-learner reference run
    doing the same total work with the same base compute delay."""
    for s in factors:
        if s < 1.0:
            raise ValueError(f"slowdown factors must be >= 1, got {s}")
    reference = replace(config, strategy="single", learners=1, stragglers={})
    ref_records = run_experiment(reference)
    ref_time = float(np.mean([r.epoch_wall_s for r in ref_records]))
    rows = []
    for s in factors:
        cfg = replace(config, stragglers={**config.stragglers, 1: float(s)})
        records = run_experiment(cfg)
        epoch_time = float(np.mean([r.epoch_wall_s for r in records]))
        rows.append(StragglerRow(slowdown=float(s), epoch_time_s=epoch_time,
                                 speedup=ref_time / epoch_time if epoch_time > 0 else float("inf")))
    return rows
