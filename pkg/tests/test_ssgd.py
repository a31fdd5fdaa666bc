import numpy as np
import pytest

from distsgd import (
    Dataset,
    LrSchedule,
    MomentumState,
    epoch_minibatches,
    gradient,
    initial_weights,
    learning_rate,
    make_dataset,
    make_objective,
    run_single,
    run_ssgd,
    sgd_step,
)
from distsgd.engines.ssgd import static_partition

CONST = LrSchedule(0.1, 0.1, 0, 0.5, 300, 400)


def test_one_iteration_matches_averaged_gradient_oracle():
    data = make_dataset("quadratic", 330, 6, seed=5)
    obj = make_objective("quadratic", 6)
    res = run_ssgd(obj, data, CONST, learners=4, epochs=1, batch_size=72, seed=5, momentum=0.9)

    parts = static_partition(epoch_minibatches(data, 72, 5, 1), 4)
    assert len(parts[0]) == 1
    w = initial_weights(obj, 5)
    state = MomentumState.zeros(obj.param_dim, 0.9)
    gs = [gradient(obj, w, parts[i][0], data) for i in range(4)]
    mean = (((gs[0] + gs[1]) + gs[2]) + gs[3]) / 4
    w = sgd_step(w, mean, learning_rate(CONST, 1, 0, 1), state)
    assert np.max(np.abs(res.weights - w)) <= 1e-12


def test_identical_minibatches_reduce_to_single_learner():
    # With every row identical, any two same-size batches carry the same
    # gradient, so averaging is the identity and SSGD must match a single
    # learner stepping once per collective round, bit for bit.
    n, dim = 100, 4
    row = np.linspace(0.5, 2.0, dim)
    data = Dataset(
        inputs=np.tile(row, (n, 1)),
        targets=np.zeros(n),
        train_indices=np.arange(90),
        heldout_indices=np.arange(90, 100),
    )
    obj = make_objective("quadratic", dim)
    res = run_ssgd(obj, data, CONST, learners=2, epochs=3, batch_size=9, seed=8)

    w = initial_weights(obj, 8)
    state = MomentumState.zeros(obj.param_dim, 0.9)
    for epoch in (1, 2, 3):
        parts = static_partition(epoch_minibatches(data, 9, 8, epoch), 2)
        q = len(parts[0])
        for k in range(q):
            g = gradient(obj, w, parts[0][k], data)
            w = sgd_step(w, g, learning_rate(CONST, epoch, k, q), state)
    assert (res.weights == w).all()


def test_weights_bit_identical_across_learners_every_iteration():
    data = make_dataset("logistic", 500, 8, seed=3)
    obj = make_objective("logistic", 8)
    res = run_ssgd(obj, data, CONST, learners=4, epochs=3, batch_size=16, seed=3,
                   record_iterates=True)
    digests = res.trace["iterate_digests"]
    assert len(digests[1]) > 0
    for i in (2, 3, 4):
        assert digests[i] == digests[1]


def test_staleness_identically_zero():
    data = make_dataset("logistic", 300, 6, seed=4)
    obj = make_objective("logistic", 6)
    res = run_ssgd(obj, data, CONST, learners=2, epochs=2, batch_size=16, seed=4)
    assert set(res.trace["staleness"].samples) == {0}
    for r in res.records:
        assert r.staleness_mean == 0.0 and r.staleness_max == 0


def test_equal_static_partition_counts():
    data = make_dataset("logistic", 500, 8, seed=3)
    obj = make_objective("logistic", 8)
    res = run_ssgd(obj, data, CONST, learners=4, epochs=1, batch_size=32, seed=3)
    counts = res.records[0].minibatch_counts
    assert len(set(counts)) == 1
    assert sum(counts) == 4 * (len(epoch_minibatches(data, 32, 3, 1)) // 4)


def test_matched_sampling_equivalence_small():
    # Four learners at batch 16 vs the matched single consumer at batch 64.
    data = make_dataset("logistic", 660, 6, seed=9)
    obj = make_objective("logistic", 6)
    res = run_ssgd(obj, data, CONST, learners=4, epochs=4, batch_size=16, seed=9)

    w = initial_weights(obj, 9)
    state = MomentumState.zeros(obj.param_dim, 0.9)
    from distsgd import heldout_loss

    losses = []
    for epoch in range(1, 5):
        parts = static_partition(epoch_minibatches(data, 16, 9, epoch), 4)
        q = len(parts[0])
        for k in range(q):
            gs = [gradient(obj, w, parts[i][k], data) for i in range(4)]
            acc = gs[0]
            for g in gs[1:]:
                acc = acc + g
            w = sgd_step(w, acc / 4, learning_rate(CONST, epoch, k, q), state)
        losses.append(heldout_loss(obj, w, data))
    for r, oracle in zip(res.records, losses):
        assert abs(r.heldout_loss - oracle) <= 1e-6 * abs(oracle)


def test_learner_count_validation():
    data = make_dataset("logistic", 100, 4, seed=1)
    obj = make_objective("logistic", 4)
    with pytest.raises(ValueError):
        run_ssgd(obj, data, CONST, learners=1, epochs=1, batch_size=10, seed=1)
    with pytest.raises(ValueError):
        # pool of 9 batches cannot feed 100 learners
        run_ssgd(obj, data, CONST, learners=100, epochs=1, batch_size=10, seed=1)


def test_deterministic_across_reruns():
    data = make_dataset("logistic", 300, 6, seed=12)
    obj = make_objective("logistic", 6)
    a = run_ssgd(obj, data, CONST, learners=2, epochs=2, batch_size=16, seed=12)
    b = run_ssgd(obj, data, CONST, learners=2, epochs=2, batch_size=16, seed=12)
    assert (a.weights == b.weights).all()
