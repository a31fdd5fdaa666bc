"""Execution substrate for learner engines: clocks, channels, and actors.

Every engine is written against this narrow interface and can run in two
modes:

* ``RealClock`` — actors are free-running OS threads, ``sleep`` burns real
  wall time, and message latency is enforced on delivery. Trajectories are
  not reproducible; only the engines' declared invariants hold.

* ``VirtualClock`` — actors are still threads, but a cooperative scheduler
  runs exactly one at a time and advances a simulated clock. All blocking
  goes through ``sleep``/``Channel.get``; scheduling order is a pure
  function of (virtual wake time, global sequence number), so a run is
  bit-reproducible given the same seeds and injected delays. Simulated
  "compute" costs exactly the injected delay and nothing else.

Rules for engine code: never block while holding a lock (locks guard plain
memory operations only), and give every channel a single consumer.
"""

from __future__ import annotations

import heapq
import itertools
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class RunAborted(RuntimeError):
    """Raised inside actors when the run is being torn down after a failure
    elsewhere; never the primary error reported to the caller."""


class DeadlockError(RuntimeError):
    """Every live actor is blocked on a channel with no message in flight."""


# ---------------------------------------------------------------------------
# Delay injection


@dataclass
class DelayModel:
    """All timing perturbations of a run.

    ``base_compute_s`` is the simulated per-minibatch compute time; learner
    ``i`` pays ``base_compute_s * slowdowns.get(i, 1.0)`` (+ optional uniform
    jitter) around each gradient computation. ``comm_latency_s`` (+ jitter)
    delays every message delivery. All jitter is drawn from per-learner /
    per-channel generators seeded from ``jitter_seed``, so virtual-clock runs
    are reproducible.
    """

    base_compute_s: float = 0.0
    slowdowns: dict[int, float] = field(default_factory=dict)
    compute_jitter_s: float = 0.0
    comm_latency_s: float = 0.0
    comm_jitter_s: float = 0.0
    stagger_s: float = 0.0
    jitter_seed: int = 0

    def __post_init__(self):
        for learner, s in self.slowdowns.items():
            if s < 1.0:
                raise ValueError(f"slowdown factor for learner {learner} must be >= 1, got {s}")

    def compute_delay_fn(self, learner_id: int) -> Callable[[], float]:
        base = self.base_compute_s * self.slowdowns.get(learner_id, 1.0)
        if self.compute_jitter_s <= 0.0:
            return lambda: base
        rng = np.random.default_rng((self.jitter_seed, 1, learner_id))
        jitter = self.compute_jitter_s
        return lambda: base + rng.uniform(0.0, jitter)

    def comm_delay_fn(self, edge_id: int) -> Callable[[], float] | None:
        if self.comm_latency_s <= 0.0 and self.comm_jitter_s <= 0.0:
            return None
        base = self.comm_latency_s
        if self.comm_jitter_s <= 0.0:
            return lambda: base
        rng = np.random.default_rng((self.jitter_seed, 2, edge_id))
        jitter = self.comm_jitter_s
        return lambda: base + rng.uniform(0.0, jitter)

    def initial_stagger(self, learner_id: int) -> float:
        return self.stagger_s * (learner_id - 1)


# ---------------------------------------------------------------------------
# Real clock


class RealChannel:
    """FIFO channel; latency is served on the consumer side at delivery."""

    def __init__(self, clock: "RealClock", delay_fn: Callable[[], float] | None):
        self._clock = clock
        self._q: queue.Queue = queue.Queue()
        self._delay_fn = delay_fn

    def put(self, item) -> None:
        if self._clock._abort.is_set():
            raise RunAborted()
        delay = self._delay_fn() if self._delay_fn else 0.0
        self._q.put((self._clock.now() + delay, item))

    def get(self):
        while True:
            try:
                deliver_at, item = self._q.get(timeout=0.05)
                break
            except queue.Empty:
                if self._clock._abort.is_set():
                    raise RunAborted() from None
        remaining = deliver_at - self._clock.now()
        if remaining > 0:
            self._clock.sleep(remaining)
        return item


class RealClock:
    """Wall-clock execution: actors are plain threads."""

    def __init__(self):
        self._abort = threading.Event()
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0

    def sleep(self, seconds: float) -> None:
        deadline = time.monotonic() + max(seconds, 0.0)
        while True:
            if self._abort.is_set():
                raise RunAborted()
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return
            time.sleep(min(remaining, 0.05))

    def channel(self, delay_fn: Callable[[], float] | None = None) -> RealChannel:
        return RealChannel(self, delay_fn)

    def run(self, actors: list[Callable[[], None]]) -> None:
        """Run all actors to completion; re-raise the first failure after
        aborting and joining the rest."""
        errors: list[BaseException] = []
        lock = threading.Lock()

        def wrap(fn):
            def body():
                try:
                    fn()
                except RunAborted:
                    pass
                except BaseException as exc:
                    with lock:
                        errors.append(exc)
                    self._abort.set()

            return body

        threads = [threading.Thread(target=wrap(fn), daemon=True) for fn in actors]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]


# ---------------------------------------------------------------------------
# Virtual clock


class _Actor:
    __slots__ = ("name", "resume", "waiting_on", "thread")

    def __init__(self, name: str):
        self.name = name
        self.resume = threading.Event()
        self.waiting_on: "VirtualChannel | None" = None
        self.thread: threading.Thread | None = None


class VirtualChannel:
    """Single-consumer FIFO channel in simulated time. Deliveries never
    overtake earlier puts (link queueing), so per-sender order is preserved
    even under randomized latency."""

    def __init__(self, clock: "VirtualClock", delay_fn: Callable[[], float] | None):
        self._clock = clock
        self._delay_fn = delay_fn
        self._last_delivery = 0.0
        self.buffer: list = []
        self.waiter: _Actor | None = None

    def put(self, item) -> None:
        delay = self._delay_fn() if self._delay_fn else 0.0
        self._clock._post_message(self, item, delay)

    def get(self):
        return self._clock._channel_get(self)


_TIMER, _MESSAGE = 0, 1


class VirtualClock:
    """Deterministic cooperative scheduler over simulated time.

    Exactly one actor executes at any moment; control is handed off through
    per-actor events. The event heap is keyed by (time, sequence number), so
    ties resolve by creation order and the whole run is reproducible.
    """

    def __init__(self):
        self._now = 0.0
        self._heap: list = []
        self._seq = itertools.count()
        self._lock = threading.Lock()
        self._actors: dict[int, _Actor] = {}
        self._live = 0
        self._current: _Actor | None = None
        self._failure: BaseException | None = None
        self._done = threading.Event()

    def now(self) -> float:
        return self._now

    def channel(self, delay_fn: Callable[[], float] | None = None) -> VirtualChannel:
        return VirtualChannel(self, delay_fn)

    # -- scheduling core ----------------------------------------------------

    def _post_message(self, ch: VirtualChannel, item, delay: float) -> None:
        with self._lock:
            deliver_at = max(self._now + max(delay, 0.0), ch._last_delivery)
            ch._last_delivery = deliver_at
            heapq.heappush(self._heap, (deliver_at, next(self._seq), _MESSAGE, ch, item))

    def _schedule_actor(self, actor: _Actor, at: float) -> None:
        # Caller holds self._lock.
        heapq.heappush(self._heap, (at, next(self._seq), _TIMER, actor, None))

    def _dispatch_next_locked(self) -> None:
        """Pop events until an actor is resumed (or the run completes/fails).
        Caller holds self._lock."""
        while True:
            if self._live == 0:
                self._done.set()
                return
            if not self._heap:
                # Nothing scheduled but actors remain: all are channel-blocked.
                if self._failure is None:
                    blocked = [a.name for a in self._actors.values() if a.waiting_on is not None]
                    self._failure = DeadlockError(
                        f"all live actors blocked on empty channels: {blocked}"
                    )
                # Tear down: wake every blocked actor; each raises RunAborted.
                for a in self._actors.values():
                    if a.waiting_on is not None:
                        a.waiting_on.waiter = None
                        a.waiting_on = None
                        self._schedule_actor(a, self._now)
                continue
            at, _, kind, target, item = heapq.heappop(self._heap)
            self._now = max(self._now, at)
            if kind == _MESSAGE:
                ch: VirtualChannel = target
                ch.buffer.append(item)
                if ch.waiter is not None:
                    waiter, ch.waiter = ch.waiter, None
                    waiter.waiting_on = None
                    self._schedule_actor(waiter, self._now)
                continue
            actor: _Actor = target
            self._current = actor
            actor.resume.set()
            return

    def _yield_and_wait(self, actor: _Actor) -> None:
        """Hand control to the scheduler and block until resumed."""
        with self._lock:
            self._dispatch_next_locked()
        actor.resume.wait()
        actor.resume.clear()
        if self._failure is not None:
            raise RunAborted()

    def _me(self) -> _Actor:
        actor = self._actors.get(threading.get_ident())
        if actor is None:
            raise RuntimeError("virtual clock used outside a registered actor")
        return actor

    # -- blocking operations ------------------------------------------------

    def sleep(self, seconds: float) -> None:
        actor = self._me()
        with self._lock:
            self._schedule_actor(actor, self._now + max(seconds, 0.0))
        self._yield_and_wait(actor)

    def _channel_get(self, ch: VirtualChannel):
        actor = self._me()
        if ch.buffer:
            return ch.buffer.pop(0)
        if ch.waiter is not None:
            raise RuntimeError("virtual channels support a single consumer")
        actor.waiting_on = ch
        ch.waiter = actor
        self._yield_and_wait(actor)
        if not ch.buffer:
            raise RunAborted()  # woken by teardown, not by a delivery
        return ch.buffer.pop(0)

    # -- run driver -----------------------------------------------------------

    def run(self, actors: list[Callable[[], None]]) -> None:
        if self._done.is_set() or self._actors:
            raise RuntimeError("VirtualClock.run is single-use and non-reentrant")

        def wrap(fn, actor: _Actor):
            def body():
                actor.resume.wait()
                actor.resume.clear()
                try:
                    if self._failure is None:
                        fn()
                except RunAborted:
                    pass
                except BaseException as exc:
                    with self._lock:
                        if self._failure is None:
                            self._failure = exc
                finally:
                    with self._lock:
                        self._live -= 1
                        self._actors.pop(threading.get_ident(), None)
                        self._dispatch_next_locked()

            return body

        handles = []
        for i, fn in enumerate(actors):
            actor = _Actor(name=f"actor-{i}")
            thread = threading.Thread(target=wrap(fn, actor), daemon=True)
            actor.thread = thread
            handles.append((actor, thread))

        with self._lock:
            self._live = len(handles)
            for actor, thread in handles:
                thread.start()
                self._actors[thread.ident] = actor
                self._schedule_actor(actor, 0.0)
            self._dispatch_next_locked()

        self._done.wait()
        for _, thread in handles:
            thread.join()
        if self._failure is not None:
            raise self._failure


Clock = RealClock | VirtualClock


def make_clock(mode: str) -> Clock:
    if mode == "real":
        return RealClock()
    if mode == "virtual":
        return VirtualClock()
    raise ValueError(f"unknown clock mode {mode!r}, expected 'real' or 'virtual'")
