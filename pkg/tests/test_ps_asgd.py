import numpy as np
import pytest

from distsgd import DelayModel, LrSchedule, make_dataset, make_objective, run_ps_asgd, run_single
from distsgd.engines import EngineAborted

CONST = LrSchedule(0.1, 0.1, 0, 0.5, 300, 400)


def test_single_learner_has_zero_staleness_and_matches_baseline():
    data = make_dataset("logistic", 500, 8, seed=3)
    obj = make_objective("logistic", 8)
    ps = run_ps_asgd(obj, data, CONST, learners=1, epochs=3, batch_size=32, seed=3)
    ref = run_single(obj, data, CONST, epochs=3, batch_size=32, seed=3)
    assert np.max(np.abs(ps.weights - ref.weights)) <= 1e-12
    assert ps.trace["staleness"].samples and set(ps.trace["staleness"].samples) == {0}
    for a, b in zip(ps.records, ref.records):
        assert a.heldout_loss == pytest.approx(b.heldout_loss, abs=1e-12)


def test_mean_staleness_scales_with_learner_count():
    data = make_dataset("logistic", 1400, 8, seed=3)
    obj = make_objective("logistic", 8)
    delays = DelayModel(base_compute_s=0.005, compute_jitter_s=0.002, jitter_seed=3)
    means = []
    for lam in (1, 2, 4, 8):
        res = run_ps_asgd(obj, data, CONST, learners=lam, epochs=1, batch_size=32,
                          seed=3, delays=delays)
        means.append(res.trace["staleness"].mean)
    assert all(b >= a for a, b in zip(means, means[1:]))  # nondecreasing in lambda
    assert 0.5 * 8 <= means[-1] <= 2 * 8  # proportional to the learner count


def test_round_robin_delays_give_exact_steady_state_staleness():
    data = make_dataset("logistic", 1400, 8, seed=3)
    obj = make_objective("logistic", 8)
    delays = DelayModel(base_compute_s=0.005, stagger_s=1e-4)
    res = run_ps_asgd(obj, data, CONST, learners=4, epochs=1, batch_size=32,
                      seed=3, delays=delays)
    samples = res.trace["staleness"].samples
    steady = samples[4:-4]
    assert steady and set(steady) == {3}


def test_server_shutdown_aborts_cleanly_with_partial_metrics():
    data = make_dataset("logistic", 500, 8, seed=3)
    obj = make_objective("logistic", 8)
    pool_size = 450 // 32 + 1
    with pytest.raises(EngineAborted) as err:
        run_ps_asgd(obj, data, CONST, learners=2, epochs=3, batch_size=32, seed=3,
                    server_fail_after=pool_size + 2)  # dies during epoch 2
    records = err.value.records
    assert len(records) == 1
    assert records[0].epoch == 1


def test_deterministic_metrics_under_virtual_delays():
    data = make_dataset("logistic", 500, 8, seed=3)
    obj = make_objective("logistic", 8)
    delays = DelayModel(base_compute_s=0.002, compute_jitter_s=0.001, jitter_seed=5)
    a = run_ps_asgd(obj, data, CONST, learners=4, epochs=2, batch_size=32, seed=3, delays=delays)
    b = run_ps_asgd(obj, data, CONST, learners=4, epochs=2, batch_size=32, seed=3, delays=delays)
    assert (a.weights == b.weights).all()
    assert [r.minibatch_counts for r in a.records] == [r.minibatch_counts for r in b.records]
    assert a.trace["staleness"].samples == b.trace["staleness"].samples


def test_counts_sum_to_pool_size():
    data = make_dataset("logistic", 500, 8, seed=3)
    obj = make_objective("logistic", 8)
    delays = DelayModel(base_compute_s=0.001)
    res = run_ps_asgd(obj, data, CONST, learners=4, epochs=2, batch_size=32, seed=3, delays=delays)
    pool_size = len(range(0, 450, 32))
    for r in res.records:
        assert sum(r.minibatch_counts) == pool_size


def test_learner_validation():
    data = make_dataset("logistic", 100, 4, seed=1)
    obj = make_objective("logistic", 4)
    with pytest.raises(ValueError):
        run_ps_asgd(obj, data, CONST, learners=0, epochs=1, batch_size=10, seed=1)
