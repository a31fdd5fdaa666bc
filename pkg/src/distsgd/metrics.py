"""Per-epoch experiment metrics shared by every learner engine."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class MetricsRecord:
    """One epoch of measurements.

    ``minibatch_counts[i]`` is the number of minibatches learner ``i+1``
    processed this epoch; the counts sum to the epoch's pool size.
    ``bytes_exchanged`` totals payload bytes sent by all participants.
    """

    epoch: int
    heldout_loss: float
    epoch_wall_s: float
    minibatch_counts: list[int]
    staleness_mean: float
    staleness_max: int
    bytes_exchanged: int


@dataclass
class StalenessRecord:
    """Per-update staleness samples collected for one strategy over a run."""

    strategy: str
    samples: list[int] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return sum(self.samples) / len(self.samples) if self.samples else 0.0

    @property
    def max(self) -> int:
        return max(self.samples) if self.samples else 0


def staleness_summary(samples: list[int]) -> tuple[float, int]:
    if not samples:
        return 0.0, 0
    return sum(samples) / len(samples), max(samples)
