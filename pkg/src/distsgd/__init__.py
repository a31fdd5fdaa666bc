"""Desk-scale library for implementing and comparing distributed SGD
strategies: a sequential baseline, synchronous allreduce SGD, asynchronous
parameter-server SGD, asynchronous decentralized (gossip) SGD over a bipartite
ring, and a hybrid local-update/async-allreduce scheme — with straggler
injection, staleness accounting, load-balance measurement, and closed-form
cost models."""

from .collective import (
    ChunkPlan,
    RingAllreduceGroup,
    make_chunk_plan,
    ring_allreduce,
    sequential_reduce,
    transfer_phase_count,
)
from .costmodel import (
    HardwareSpec,
    adpsgd_epoch_time,
    fit_ssgd_cost,
    hybrid_epoch_time,
    min_breakeven_bandwidth,
    predict_speedup,
    ssgd_epoch_time,
)
from .engines import (
    ChecksumError,
    EngineAborted,
    EngineFailure,
    RunResult,
    Topology,
    WeightMessage,
    adpsgd_mix,
    run_adpsgd,
    run_hybrid,
    run_ps_asgd,
    run_single,
    run_ssgd,
)
from .harness import (
    RunConfig,
    evaluate_heldout,
    measure_straggler_degradation,
    run_experiment,
    run_experiment_full,
)
from .metrics import MetricsRecord, StalenessRecord
from .objectives import (
    Dataset,
    LogisticObjective,
    QuadraticObjective,
    TinyMlpObjective,
    epoch_minibatches,
    evaluate,
    finite_diff_gradient,
    gradient,
    heldout_loss,
    initial_weights,
    make_dataset,
    make_objective,
    solve_quadratic_minimizer,
)
from .optim import LrSchedule, MomentumState, baseline_schedule, large_batch_schedule, learning_rate, sgd_step
from .pool import MinibatchPool
from .runtime import DeadlockError, DelayModel, RealClock, VirtualClock, make_clock

__version__ = "0.1.0"
