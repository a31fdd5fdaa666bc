"""Asynchronous decentralized parallel SGD over a bipartite ring.

Odd-id learners are senders, even-id learners are receivers; a sender engages
its right/left neighbor on alternating iterations. Every learner runs a main
thread (draw a minibatch from the shared pool, compute a gradient, apply the
local update) and a communication agent. After each local update the sender
signals its agent to ship a checksummed snapshot to the engaged neighbor and
overlaps the next gradient computation with the exchange; it only blocks if
the next update would land before the previous averaging finished, so a local
update and an averaging can never interleave on one learner. The receiver's
agent, on arrival, atomically replies with its current weights and sets its
weights to the pairwise mean; both sides compute the identical mean, so the
coordinate-wise sum of the pair is exactly preserved by every exchange.

An epoch ends at pool exhaustion plus quiescence: senders drain their final
exchange and post end-of-epoch markers to both neighbors; a receiver is
quiesced once it holds markers from both adjacent senders.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

import threading

from ..metrics import MetricsRecord, StalenessRecord, staleness_summary
from ..objectives import Dataset, Objective, epoch_minibatches, gradient, heldout_loss, initial_weights
from ..optim import LrSchedule, MomentumState, learning_rate, sgd_step
from ..pool import MinibatchPool
from ..runtime import Clock, DelayModel, RunAborted, VirtualClock
from .common import EngineFailure, RunResult, Topology, WeightMessage


def adpsgd_mix(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise averaging step: both outputs are the identical coordinate-wise
    mean, so the two-learner mixing matrix is doubly stochastic and symmetric
    and the pair's floating-point sum is preserved bit-exactly."""
    if a.shape != b.shape:
        raise ValueError(f"dim mismatch in pairwise mix: {a.shape} vs {b.shape}")
    mean = (a + b) / 2.0
    return mean, mean


@dataclass
class _LearnerState:
    weights: np.ndarray
    momentum: MomentumState
    lock: threading.Lock = field(default_factory=threading.Lock)
    iteration: int = 0      # local update counter (message timestamps)
    mutations: int = 0      # every weight mutation: local updates + averagings
    staleness: list[int] = field(default_factory=list)
    exchanges: int = 0


@dataclass
class _ExchangeTraceEntry:
    sender: int
    receiver: int
    pair_sum_before: np.ndarray
    pair_sum_after: np.ndarray


def run_adpsgd(
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
    record_trace: bool = False,
    init_weights: np.ndarray | None = None,
) -> RunResult:
    """Returns the uniform average of all learners' final weights; held-out
    loss during training is also evaluated on the average at epoch boundaries.
    Requires an even learner count (the parity bipartition of the ring)."""
    topo = Topology(learners)  # validates even count >= 2
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if epochs > schedule.total_epochs:
        raise ValueError(f"epochs ({epochs}) exceeds schedule.total_epochs ({schedule.total_epochs})")
    clock = clock or VirtualClock()
    delays = delays or DelayModel()

    pool = MinibatchPool(epoch_minibatches(dataset, batch_size, seed, 1) if epochs else [], learners)
    payload_bytes = objective.param_dim * 8

    w0 = init_weights.copy() if init_weights is not None else initial_weights(objective, seed)
    states = {
        i: _LearnerState(weights=w0.copy(), momentum=MomentumState.zeros(objective.param_dim, momentum))
        for i in range(1, learners + 1)
    }

    # Wiring: receiver agents consume inbox[j]; sender agents consume reply[i]
    # plus a job/ack pair with their own main thread.
    inbox = {j: clock.channel(delays.comm_delay_fn(j)) for j in topo.receivers()}
    reply = {i: clock.channel(delays.comm_delay_fn(i)) for i in topo.senders()}
    job = {i: clock.channel() for i in topo.senders()}
    ack = {i: clock.channel() for i in topo.senders()}
    quiesced = {j: clock.channel() for j in topo.receivers()}
    report_ch = clock.channel()
    go = {i: clock.channel() for i in range(1, learners + 1)}

    records: list[MetricsRecord] = []
    staleness = StalenessRecord("adpsgd")
    exchange_trace: list[_ExchangeTraceEntry] = []
    final = {}

    def sender_main(i: int):
        st = states[i]
        compute_delay = delays.compute_delay_fn(i)

        def body():
            stagger = delays.initial_stagger(i)
            if stagger > 0:
                clock.sleep(stagger)
            for epoch in range(1, epochs + 1):
                try:
                    pool_size = pool.size
                    pending = False
                    while True:
                        drawn = pool.next(i)
                        if drawn is None:
                            break
                        k, batch = drawn
                        with st.lock:
                            snap = st.weights.copy()
                            mut0 = st.mutations
                        # Always yield, even at zero delay: async learners must
                        # interleave fairly or one can starve the shared pool.
                        clock.sleep(compute_delay())
                        g = gradient(objective, snap, batch, dataset)
                        if pending:
                            ack[i].get()  # previous averaging must land first
                            pending = False
                        with st.lock:
                            lr = learning_rate(schedule, epoch, k, pool_size)
                            st.staleness.append(st.mutations - mut0)
                            st.weights = sgd_step(st.weights, g, lr, st.momentum)
                            st.mutations += 1
                            st.iteration += 1
                            msg = WeightMessage.snapshot(i, st.iteration, st.weights)
                            partner = topo.partner(i, st.iteration)
                        job[i].put(("exchange", msg, partner))
                        pending = True
                    if pending:
                        ack[i].get()
                    job[i].put(("epoch_done", None, None))
                except RunAborted:
                    raise
                except Exception as exc:
                    raise EngineFailure(epoch, exc) from exc
                with st.lock:
                    w = st.weights.copy()
                    samples = st.staleness
                    st.staleness = []
                report_ch.put((i, w, samples, st.exchanges))
                st.exchanges = 0
                go[i].get()
            job[i].put(("stop", None, None))
            final[i] = st.weights

        return body

    def sender_agent(i: int):
        st = states[i]

        def body():
            last_reply_ts: dict[int, int] = {}
            while True:
                kind, msg, partner = job[i].get()
                if kind == "stop":
                    return
                if kind == "epoch_done":
                    inbox[topo.left(i)].put(("epoch_done", i))
                    inbox[topo.right(i)].put(("epoch_done", i))
                    continue
                inbox[partner].put(("exchange", msg))
                resp: WeightMessage = reply[i].get()
                resp.validate()
                if resp.timestamp < last_reply_ts.get(resp.origin, -1):
                    raise RuntimeError(
                        f"non-monotone timestamp from learner {resp.origin}: "
                        f"{resp.timestamp} after {last_reply_ts[resp.origin]}"
                    )
                last_reply_ts[resp.origin] = resp.timestamp
                with st.lock:
                    # Main thread is gated on the ack, so weights still equal
                    # the shipped snapshot here: the pair sum is conserved.
                    mixed, _ = adpsgd_mix(msg.payload, resp.payload)
                    if record_trace:
                        exchange_trace.append(_ExchangeTraceEntry(
                            sender=i,
                            receiver=resp.origin,
                            pair_sum_before=msg.payload + resp.payload,
                            pair_sum_after=mixed + mixed,
                        ))
                    st.weights = mixed
                    st.mutations += 1
                    st.exchanges += 1
                ack[i].put(True)

        return body

    def receiver_main(j: int):
        st = states[j]
        compute_delay = delays.compute_delay_fn(j)

        def body():
            stagger = delays.initial_stagger(j)
            if stagger > 0:
                clock.sleep(stagger)
            for epoch in range(1, epochs + 1):
                try:
                    pool_size = pool.size
                    while True:
                        drawn = pool.next(j)
                        if drawn is None:
                            break
                        k, batch = drawn
                        with st.lock:
                            snap = st.weights.copy()
                            mut0 = st.mutations
                        clock.sleep(compute_delay())  # always yield (fairness)
                        g = gradient(objective, snap, batch, dataset)
                        with st.lock:
                            lr = learning_rate(schedule, epoch, k, pool_size)
                            st.staleness.append(st.mutations - mut0)
                            st.weights = sgd_step(st.weights, g, lr, st.momentum)
                            st.mutations += 1
                            st.iteration += 1
                    quiesced[j].get()  # both neighbor senders posted markers
                except RunAborted:
                    raise
                except Exception as exc:
                    raise EngineFailure(epoch, exc) from exc
                with st.lock:
                    w = st.weights.copy()
                    samples = st.staleness
                    st.staleness = []
                exchanges = st.exchanges
                st.exchanges = 0
                report_ch.put((j, w, samples, exchanges))
                go[j].get()
            inbox[j].put(("stop", None))
            final[j] = st.weights

        return body

    def receiver_agent(j: int):
        st = states[j]

        def body():
            markers = 0
            last_ts: dict[int, int] = {}
            while True:
                item = inbox[j].get()
                if item[0] == "stop":
                    return
                if item[0] == "epoch_done":
                    markers += 1
                    if markers == 2:
                        markers = 0
                        quiesced[j].put(True)
                    continue
                msg: WeightMessage = item[1]
                msg.validate()
                if msg.timestamp < last_ts.get(msg.origin, -1):
                    raise RuntimeError(
                        f"non-monotone timestamp from learner {msg.origin}: "
                        f"{msg.timestamp} after {last_ts[msg.origin]}"
                    )
                last_ts[msg.origin] = msg.timestamp
                with st.lock:
                    mine = WeightMessage.snapshot(j, st.iteration, st.weights)
                    mixed, _ = adpsgd_mix(msg.payload, mine.payload)
                    st.weights = mixed
                    st.mutations += 1
                    st.exchanges += 1
                reply[msg.origin].put(mine)

        return body

    staleness_by_learner: dict[int, list[int]] = {i: [] for i in range(1, learners + 1)}

    def orchestrator():
        def consensus(weights_by_id: dict[int, np.ndarray]) -> np.ndarray:
            stack = np.stack([weights_by_id[i] for i in sorted(weights_by_id)])
            return np.mean(stack, axis=0)

        t0 = clock.now()
        for epoch in range(1, epochs + 1):
            reports = {}
            for _ in range(learners):
                i, w, samples, exchanges = report_ch.get()
                reports[i] = (w, samples, exchanges)
                staleness_by_learner[i].extend(samples)
            wall = clock.now() - t0
            counts = pool.counts.copy()
            avg = consensus({i: reports[i][0] for i in reports})
            all_samples = [s for i in sorted(reports) for s in reports[i][1]]
            staleness.samples.extend(all_samples)
            mean, mx = staleness_summary(all_samples)
            n_exchanges = sum(reports[i][2] for i in topo.senders())
            records.append(
                MetricsRecord(
                    epoch=epoch,
                    heldout_loss=heldout_loss(objective, avg, dataset),
                    epoch_wall_s=wall,
                    minibatch_counts=counts,
                    staleness_mean=mean,
                    staleness_max=mx,
                    bytes_exchanged=2 * n_exchanges * payload_bytes,
                )
            )
            if epoch < epochs:
                pool.reset(epoch_minibatches(dataset, batch_size, seed, epoch + 1))
            for i in range(1, learners + 1):
                go[i].put(True)
            t0 = clock.now()
        final["avg"] = None  # filled after actors join

    actors = []
    for i in topo.senders():
        actors.append(sender_main(i))
        actors.append(sender_agent(i))
    for j in topo.receivers():
        actors.append(receiver_main(j))
        actors.append(receiver_agent(j))
    actors.append(orchestrator)
    clock.run(actors)

    if epochs == 0:
        avg = w0
    else:
        avg = np.mean(np.stack([final[i] for i in range(1, learners + 1)]), axis=0)
    trace = {"staleness": staleness, "staleness_by_learner": staleness_by_learner}
    if record_trace:
        trace["exchanges"] = exchange_trace
    return RunResult(weights=avg, records=records, trace=trace)
