"""Momentum SGD step and the warmup/anneal learning-rate schedule.

The large-batch schedule ramps the learning rate linearly per iteration from
``base_lr`` (first iteration of epoch 1) to ``peak_lr`` (last iteration of the
final warmup epoch), holds it at ``peak_lr`` until ``anneal_start_epoch``, and
from there multiplies by ``anneal_factor`` once per epoch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LrSchedule:
    base_lr: float
    peak_lr: float
    warmup_epochs: int
    anneal_factor: float
    anneal_start_epoch: int
    total_epochs: int

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ValueError(f"base_lr must be > 0, got {self.base_lr}")
        if self.peak_lr < self.base_lr:
            raise ValueError(f"peak_lr ({self.peak_lr}) must be >= base_lr ({self.base_lr})")
        if self.warmup_epochs < 0:
            raise ValueError(f"warmup_epochs must be >= 0, got {self.warmup_epochs}")
        if not 0.0 < self.anneal_factor < 1.0:
            raise ValueError(f"anneal_factor must lie in (0, 1), got {self.anneal_factor}")
        if self.anneal_start_epoch <= self.warmup_epochs:
            raise ValueError(
                f"anneal_start_epoch ({self.anneal_start_epoch}) must be > "
                f"warmup_epochs ({self.warmup_epochs})"
            )
        if self.total_epochs < 1:
            raise ValueError(f"total_epochs must be >= 1, got {self.total_epochs}")


def large_batch_schedule(total_epochs: int = 16) -> LrSchedule:
    """The large-batch recipe: warm up 0.1 -> 1.0 over 10 epochs, then anneal
    by 1/sqrt(2) each epoch from the 11th."""
    return LrSchedule(
        base_lr=0.1,
        peak_lr=1.0,
        warmup_epochs=10,
        anneal_factor=1.0 / np.sqrt(2.0),
        anneal_start_epoch=11,
        total_epochs=total_epochs,
    )


def baseline_schedule(lr: float = 0.1, total_epochs: int = 16) -> LrSchedule:
    """Constant lr until epoch 10, annealing by 1/sqrt(2) from the 11th."""
    return LrSchedule(
        base_lr=lr,
        peak_lr=lr,
        warmup_epochs=0,
        anneal_factor=1.0 / np.sqrt(2.0),
        anneal_start_epoch=11,
        total_epochs=total_epochs,
    )


def learning_rate(spec: LrSchedule, epoch: int, iter_in_epoch: int = 0, iters_per_epoch: int = 1) -> float:
    """Learning rate at a 1-based epoch and 0-based iteration within it.

    Warmup interpolates per iteration so the ramp is continuous across epoch
    boundaries; between warmup end and anneal start the rate holds at peak.
    """
    if not 1 <= epoch <= spec.total_epochs:
        raise ValueError(f"epoch {epoch} outside schedule range 1..{spec.total_epochs}")
    if iters_per_epoch < 1:
        raise ValueError(f"iters_per_epoch must be >= 1, got {iters_per_epoch}")
    if not 0 <= iter_in_epoch < iters_per_epoch:
        raise ValueError(f"iter_in_epoch {iter_in_epoch} outside 0..{iters_per_epoch - 1}")
    if epoch <= spec.warmup_epochs:
        total = spec.warmup_epochs * iters_per_epoch
        k = (epoch - 1) * iters_per_epoch + iter_in_epoch
        if total <= 1:
            return spec.peak_lr
        t = k / (total - 1)
        return spec.base_lr * (1.0 - t) + spec.peak_lr * t
    if epoch >= spec.anneal_start_epoch:
        return spec.peak_lr * spec.anneal_factor ** (epoch - spec.anneal_start_epoch + 1)
    return spec.peak_lr


@dataclass
class MomentumState:
    """Heavy-ball velocity buffer. Owned by exactly one learner; never
    transmitted or averaged between learners."""

    velocity: np.ndarray
    mu: float = 0.9

    def __post_init__(self):
        if not 0.0 <= self.mu < 1.0:
            raise ValueError(f"momentum coefficient must lie in [0, 1), got {self.mu}")

    @classmethod
    def zeros(cls, dim: int, mu: float = 0.9) -> "MomentumState":
        return cls(velocity=np.zeros(dim), mu=mu)


def sgd_step(weights: np.ndarray, grad: np.ndarray, lr: float, state: MomentumState) -> np.ndarray:
    """One heavy-ball update: v <- mu*v + g; w <- w - lr*v. Returns the new
    weights; with mu = 0 this is bit-identical to plain w - lr*g."""
    if weights.shape != grad.shape or weights.shape != state.velocity.shape:
        raise ValueError(
            f"dim mismatch: weights {weights.shape}, grad {grad.shape}, "
            f"velocity {state.velocity.shape}"
        )
    if lr <= 0:
        raise ValueError(f"learning rate must be > 0, got {lr}")
    state.velocity *= state.mu
    state.velocity += grad
    return weights - lr * state.velocity
