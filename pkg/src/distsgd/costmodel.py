"""Closed-form runtime models: bandwidth breakeven and straggler slowdown.

A pipelined ring allreduce moves a message of M bytes in about 2*M/bandwidth
seconds regardless of the participant count, so communication and computation
break even at a bandwidth of 2*M/compute_time. Synchronous epochs are gated
by the slowest learner (compute scales with max slowdown, communication is
additive); shared-pool decentralized epochs scale with the harmonic sum of
the learners' rates.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class HardwareSpec:
    model_bytes: float
    per_batch_compute_s: float
    bandwidth_bytes_per_s: float
    learners: int

    def __post_init__(self):
        if self.model_bytes <= 0 or self.per_batch_compute_s <= 0 or self.bandwidth_bytes_per_s <= 0:
            raise ValueError("hardware spec values must all be positive")
        if self.learners < 1:
            raise ValueError(f"learners must be >= 1, got {self.learners}")

    def min_breakeven_bandwidth(self) -> float:
        return min_breakeven_bandwidth(self.model_bytes, self.per_batch_compute_s)


def min_breakeven_bandwidth(model_bytes: float, compute_time_s: float) -> float:
    """Bandwidth (bytes/s) at which a 2*M/bandwidth allreduce takes exactly as
    long as one batch's gradient computation."""
    if model_bytes <= 0:
        raise ValueError(f"model_bytes must be > 0, got {model_bytes}")
    if compute_time_s <= 0:
        raise ValueError(f"compute_time_s must be > 0, got {compute_time_s}")
    return 2.0 * model_bytes / compute_time_s


def fit_ssgd_cost(time_a: float, time_b: float, slowdown_a: float = 1.0, slowdown_b: float = 2.0) -> tuple[float, float]:
    """Calibrate the (compute, communication) split of a synchronous epoch
    from two measured epoch times at different single-learner slowdowns."""
    if time_a <= 0 or time_b <= 0:
        raise ValueError("epoch times must be positive")
    if slowdown_b == slowdown_a:
        raise ValueError("calibration needs two distinct slowdown factors")
    compute = (time_b - time_a) / (slowdown_b - slowdown_a)
    comm = time_a - slowdown_a * compute
    return compute, comm


def ssgd_epoch_time(compute_s: float, comm_s: float, slowdowns: list[float]) -> float:
    """max(slowdown)*compute + comm: lockstep compute is gated by the slowest
    learner; the collective cost is additive and slowdown-independent."""
    if compute_s <= 0 or comm_s <= 0:
        raise ValueError("compute and communication times must be positive")
    if not slowdowns:
        raise ValueError("slowdown list must be nonempty")
    return max(slowdowns) * compute_s + comm_s


def hybrid_epoch_time(compute_s: float, comm_s: float, slowdowns: list[float], overhead_s: float = 0.0) -> float:
    """Overlap hides the smaller of compute and communication; under slowdown
    the gated compute term dominates, grouping hybrid with the synchronous
    strategy for straggler behavior."""
    if compute_s <= 0 or comm_s <= 0:
        raise ValueError("compute and communication times must be positive")
    if not slowdowns:
        raise ValueError("slowdown list must be nonempty")
    return max(max(slowdowns) * compute_s, comm_s) + overhead_s


def adpsgd_epoch_time(base_epoch_s: float, learners: int, slowdowns: list[float],
                      exchange_overhead_s: float = 0.0) -> float:
    """Shared-pool rate-proportional model: T1 * n / sum_i(1/s_i).

    A learner slowed by s contributes rate 1/s to draining the pool, so one
    severe straggler costs at most one learner's share of throughput.
    ``exchange_overhead_s`` is an optional additive per-epoch averaging cost.
    """
    if base_epoch_s <= 0:
        raise ValueError(f"base epoch time must be > 0, got {base_epoch_s}")
    if learners < 2:
        raise ValueError(f"learners must be >= 2, got {learners}")
    if len(slowdowns) != learners:
        raise ValueError(f"expected {learners} slowdown factors, got {len(slowdowns)}")
    if any(s < 1.0 for s in slowdowns):
        raise ValueError("slowdown factors must be >= 1")
    rate = sum(1.0 / s for s in slowdowns)
    return base_epoch_s * learners / rate + exchange_overhead_s


def predict_speedup(serial_epoch_s: float, strategy_epoch_s: float) -> float:
    if serial_epoch_s <= 0 or strategy_epoch_s <= 0:
        raise ValueError("epoch times must be positive")
    return serial_epoch_s / strategy_epoch_s
