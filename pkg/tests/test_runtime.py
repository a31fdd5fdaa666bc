import threading
import time

import numpy as np
import pytest

from distsgd import DeadlockError, DelayModel, RealClock, VirtualClock, make_clock
from distsgd.runtime import RunAborted


def test_virtual_sleep_orders_actors_by_wake_time():
    clock = VirtualClock()
    log = []

    def actor(name, delay):
        def body():
            clock.sleep(delay)
            log.append((name, clock.now()))

        return body

    clock.run([actor("slow", 0.5), actor("fast", 0.1), actor("mid", 0.3)])
    assert log == [("fast", 0.1), ("mid", 0.3), ("slow", 0.5)]


def test_virtual_run_is_deterministic():
    def trace_once(seed):
        clock = VirtualClock()
        ch = clock.channel()
        log = []
        rng = np.random.default_rng(seed)
        delays = rng.uniform(0, 1e-3, size=20)

        def producer():
            for i, d in enumerate(delays):
                clock.sleep(d)
                ch.put(i)

        def consumer():
            for _ in range(20):
                log.append((ch.get(), round(clock.now(), 9)))

        clock.run([producer, consumer])
        return log

    assert trace_once(7) == trace_once(7)


def test_channel_fifo_preserved_under_random_latency():
    clock = VirtualClock()
    rng = np.random.default_rng(11)
    ch = clock.channel(delay_fn=lambda: rng.uniform(0, 1e-2))
    got = []

    def producer():
        for i in range(50):
            ch.put(i)

    def consumer():
        for _ in range(50):
            got.append(ch.get())

    clock.run([producer, consumer])
    assert got == list(range(50))


def test_virtual_deadlock_detection():
    clock = VirtualClock()
    a = clock.channel()
    b = clock.channel()

    def first():
        a.get()

    def second():
        b.get()

    with pytest.raises(DeadlockError):
        clock.run([first, second])


def test_virtual_exception_aborts_peers():
    clock = VirtualClock()
    ch = clock.channel()

    def failing():
        clock.sleep(0.1)
        raise RuntimeError("boom")

    def blocked():
        ch.get()

    with pytest.raises(RuntimeError, match="boom"):
        clock.run([failing, blocked])


def test_virtual_clock_single_use():
    clock = VirtualClock()
    clock.run([lambda: None])
    with pytest.raises(RuntimeError):
        clock.run([lambda: None])


def test_virtual_channel_single_consumer_enforced():
    clock = VirtualClock()
    ch = clock.channel()

    def consumer():
        ch.get()

    with pytest.raises((RuntimeError, DeadlockError)):
        clock.run([consumer, consumer])


def test_message_latency_advances_clock():
    clock = VirtualClock()
    ch = clock.channel(delay_fn=lambda: 0.25)
    seen = {}

    def producer():
        ch.put("x")

    def consumer():
        seen["item"] = ch.get()
        seen["at"] = clock.now()

    clock.run([producer, consumer])
    assert seen["item"] == "x"
    assert seen["at"] == pytest.approx(0.25)


def test_real_clock_runs_threads_and_propagates_errors():
    clock = RealClock()
    ch = clock.channel()

    def failing():
        raise ValueError("bad")

    def blocked():
        ch.get()  # unblocked by the abort, raising RunAborted internally

    with pytest.raises(ValueError, match="bad"):
        clock.run([failing, blocked])


def test_real_clock_sleep_and_channel_latency():
    clock = RealClock()
    ch = clock.channel(delay_fn=lambda: 0.02)
    out = {}

    def producer():
        ch.put(1)

    def consumer():
        t0 = clock.now()
        out["item"] = ch.get()
        out["dt"] = clock.now() - t0

    clock.run([producer, consumer])
    assert out["item"] == 1
    assert out["dt"] >= 0.015


def test_make_clock():
    assert isinstance(make_clock("real"), RealClock)
    assert isinstance(make_clock("virtual"), VirtualClock)
    with pytest.raises(ValueError):
        make_clock("cosmic")


def test_delay_model_validation_and_determinism():
    with pytest.raises(ValueError):
        DelayModel(slowdowns={1: 0.5})
    dm = DelayModel(base_compute_s=0.01, slowdowns={2: 3.0},
                    compute_jitter_s=0.005, jitter_seed=9)
    assert dm.compute_delay_fn(1)() == pytest.approx(0.01, abs=0.005 + 1e-12)
    a = [DelayModel(base_compute_s=0, compute_jitter_s=1, jitter_seed=9).compute_delay_fn(4)() for _ in range(5)]
    b = [DelayModel(base_compute_s=0, compute_jitter_s=1, jitter_seed=9).compute_delay_fn(4)() for _ in range(5)]
    assert a == b
    assert dm.initial_stagger(1) == 0.0


def test_delay_model_slowdown_applies_to_named_learner():
    dm = DelayModel(base_compute_s=0.01, slowdowns={2: 3.0})
    assert dm.compute_delay_fn(2)() == pytest.approx(0.03)
    assert dm.compute_delay_fn(1)() == pytest.approx(0.01)
    assert dm.comm_delay_fn(0) is None
    dm2 = DelayModel(comm_latency_s=0.001)
    assert dm2.comm_delay_fn(0)() == pytest.approx(0.001)
