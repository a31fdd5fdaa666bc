"""Learner engines implementing the five training strategies."""

from .adpsgd import adpsgd_mix, run_adpsgd
from .common import (
    ChecksumError,
    EngineAborted,
    EngineFailure,
    RunResult,
    Topology,
    WeightMessage,
    payload_digest,
)
from .hybrid import run_hybrid
from .ps_asgd import ServerShutdown, run_ps_asgd
from .single import run_single
from .ssgd import run_ssgd, static_partition

__all__ = [
    "ChecksumError",
    "EngineAborted",
    "EngineFailure",
    "RunResult",
    "ServerShutdown",
    "Topology",
    "WeightMessage",
    "adpsgd_mix",
    "payload_digest",
    "run_adpsgd",
    "run_hybrid",
    "run_ps_asgd",
    "run_single",
    "run_ssgd",
    "static_partition",
]
