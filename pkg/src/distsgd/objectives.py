"""Desk-scale differentiable objectives, synthetic datasets, and gradient oracles.

Weight vectors ("parameter vectors") are flat 1-D float64 numpy arrays
throughout the package. All objective evaluations are pure functions of
(objective, weights, batch, dataset) and are safe to call concurrently from
any number of learner threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OBJECTIVE_KINDS = ("quadratic", "logistic", "tiny-mlp")

# Fraction of labels flipped when generating logistic targets from the
# hidden separator, and the noise scale on tiny-mlp teacher outputs.
LABEL_NOISE = 0.05
MLP_TARGET_NOISE = 0.05


@dataclass(frozen=True)
class Dataset:
    """Synthetic regression/classification data with a train/held-out split.

    ``inputs`` is (n, input_dim) float64, ``targets`` is (n,) float64. The
    two index ranges are contiguous and disjoint; rows are i.i.d. so the
    leading 90% serves as training data and the trailing 10% is held out.
    """

    inputs: np.ndarray
    targets: np.ndarray
    train_indices: np.ndarray
    heldout_indices: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_train(self) -> int:
        return len(self.train_indices)


@dataclass(frozen=True)
class QuadraticObjective:
    """Strictly convex quadratic built from data rows.

    Per-sample cost: 0.5 * w.(x x^T + I).w - x.w. The identity stabilizer
    keeps every batch strictly convex; with all-zero inputs the batch cost
    reduces to the pure bowl 0.5 * ||w||^2.
    """

    input_dim: int
    regularization: float = 0.0

    kind = "quadratic"

    @property
    def param_dim(self) -> int:
        return self.input_dim


@dataclass(frozen=True)
class LogisticObjective:
    """Binary logistic regression with L2 regularization (targets in {0,1})."""

    input_dim: int
    regularization: float = 1e-4

    kind = "logistic"

    @property
    def param_dim(self) -> int:
        return self.input_dim


@dataclass(frozen=True)
class TinyMlpObjective:
    """One-hidden-layer tanh network with squared-error loss.

    Parameters are packed flat as [W1 (hidden, input), b1 (hidden),
    w2 (hidden), b2 (1)].
    """

    input_dim: int = 10
    hidden_dim: int = 16
    regularization: float = 0.0

    kind = "tiny-mlp"

    @property
    def param_dim(self) -> int:
        return self.hidden_dim * self.input_dim + 2 * self.hidden_dim + 1

    def unpack(self, w: np.ndarray):
        h, d = self.hidden_dim, self.input_dim
        w1 = w[: h * d].reshape(h, d)
        b1 = w[h * d : h * d + h]
        w2 = w[h * d + h : h * d + 2 * h]
        b2 = w[h * d + 2 * h]
        return w1, b1, w2, b2


Objective = QuadraticObjective | LogisticObjective | TinyMlpObjective

_DEFAULT_REG = {"quadratic": 0.0, "logistic": 1e-4, "tiny-mlp": 0.0}


def make_objective(
    kind: str,
    input_dim: int,
    hidden_dim: int = 16,
    regularization: float | None = None,
) -> Objective:
    """Build an objective of the given kind; regularization defaults per kind."""
    if kind not in OBJECTIVE_KINDS:
        raise ValueError(f"unknown objective kind {kind!r}, expected one of {OBJECTIVE_KINDS}")
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")
    reg = _DEFAULT_REG[kind] if regularization is None else regularization
    if reg < 0:
        raise ValueError(f"regularization must be >= 0, got {reg}")
    if kind == "quadratic":
        return QuadraticObjective(input_dim, reg)
    if kind == "logistic":
        return LogisticObjective(input_dim, reg)
    if hidden_dim < 1:
        raise ValueError(f"hidden_dim must be >= 1, got {hidden_dim}")
    return TinyMlpObjective(input_dim, hidden_dim, reg)


def make_dataset(kind: str, n_samples: int, input_dim: int, seed: int) -> Dataset:
    """Generate a synthetic dataset with a 90/10 train/held-out split.

    Features are standard Gaussian. Logistic targets come from a hidden
    ground-truth separator with a 5% label-flip noise; tiny-mlp targets come
    from a hidden random teacher network plus Gaussian noise; the quadratic
    objective ignores targets entirely (they are stored as zeros).
    Regeneration from the same arguments is bit-identical.
    """
    if kind not in OBJECTIVE_KINDS:
        raise ValueError(f"unknown objective kind {kind!r}, expected one of {OBJECTIVE_KINDS}")
    if n_samples < 10:
        raise ValueError(f"n_samples must be >= 10, got {n_samples}")
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")

    rng = np.random.default_rng(seed)
    inputs = rng.standard_normal((n_samples, input_dim))
    if kind == "logistic":
        separator = rng.standard_normal(input_dim)
        labels = (inputs @ separator > 0.0).astype(np.float64)
        flip = rng.random(n_samples) < LABEL_NOISE
        targets = np.where(flip, 1.0 - labels, labels)
    elif kind == "tiny-mlp":
        # Hidden teacher with the default tiny-mlp shape for this input_dim.
        teacher = TinyMlpObjective(input_dim=input_dim)
        wt = rng.standard_normal(teacher.param_dim)
        targets = _mlp_forward(teacher, wt, inputs) + MLP_TARGET_NOISE * rng.standard_normal(n_samples)
    else:
        targets = np.zeros(n_samples)

    n_heldout = n_samples // 10
    n_train = n_samples - n_heldout
    return Dataset(
        inputs=inputs,
        targets=targets,
        train_indices=np.arange(n_train),
        heldout_indices=np.arange(n_train, n_samples),
    )


def epoch_minibatches(dataset: Dataset, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """The epoch's minibatch pool: a seeded shuffle of the training indices
    cut into consecutive batches (the final batch may be short)."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    rng = np.random.default_rng((seed, epoch))
    order = dataset.train_indices.copy()
    rng.shuffle(order)
    return [order[i : i + batch_size] for i in range(0, len(order), batch_size)]


def _check_dims(obj: Objective, weights: np.ndarray) -> None:
    if weights.ndim != 1 or weights.size != obj.param_dim:
        raise ValueError(
            f"parameter dim mismatch for {obj.kind}: expected {obj.param_dim}, "
            f"got shape {weights.shape}"
        )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Overflow-free piecewise evaluation.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _mlp_forward(obj: TinyMlpObjective, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    w1, b1, w2, b2 = obj.unpack(w)
    return np.tanh(x @ w1.T + b1) @ w2 + b2


def _data_loss(obj: Objective, weights: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """Mean per-sample cost over the given rows, without regularization."""
    if obj.kind == "quadratic":
        xw = x @ weights
        return 0.5 * float(weights @ weights) + 0.5 * float(np.mean(xw * xw)) - float(np.mean(x, axis=0) @ weights)
    if obj.kind == "logistic":
        s = 2.0 * y - 1.0
        margins = s * (x @ weights)
        return float(np.mean(np.logaddexp(0.0, -margins)))
    pred = _mlp_forward(obj, weights, x)
    resid = pred - y
    return 0.5 * float(np.mean(resid * resid))


def evaluate(obj: Objective, weights: np.ndarray, batch: np.ndarray, data: Dataset) -> float:
    """Mean per-sample cost over the batch plus the L2 regularization term."""
    _check_dims(obj, weights)
    x = data.inputs[batch]
    y = data.targets[batch]
    loss = _data_loss(obj, weights, x, y)
    if obj.regularization:
        loss += 0.5 * obj.regularization * float(weights @ weights)
    if not np.isfinite(loss):
        raise ValueError(f"{obj.kind} loss is non-finite (weights diverged?)")
    return loss


def gradient(obj: Objective, weights: np.ndarray, batch: np.ndarray, data: Dataset) -> np.ndarray:
    """Exact analytic gradient of :func:`evaluate` with respect to the weights."""
    _check_dims(obj, weights)
    x = data.inputs[batch]
    y = data.targets[batch]
    m = len(batch)
    if obj.kind == "quadratic":
        g = weights + x.T @ (x @ weights) / m - np.mean(x, axis=0)
    elif obj.kind == "logistic":
        s = 2.0 * y - 1.0
        margins = s * (x @ weights)
        g = x.T @ (-s * _sigmoid(-margins)) / m
    else:
        w1, b1, w2, b2 = obj.unpack(weights)
        z = x @ w1.T + b1
        a = np.tanh(z)
        resid = (a @ w2 + b2 - y) / m
        gw2 = a.T @ resid
        gb2 = np.sum(resid)
        gz = np.outer(resid, w2) * (1.0 - a * a)
        gw1 = gz.T @ x
        gb1 = np.sum(gz, axis=0)
        g = np.concatenate([gw1.ravel(), gb1, gw2, [gb2]])
    if obj.regularization:
        g = g + obj.regularization * weights
    if not np.all(np.isfinite(g)):
        raise ValueError(f"{obj.kind} gradient is non-finite (weights diverged?)")
    return g


def finite_diff_gradient(
    obj: Objective, weights: np.ndarray, batch: np.ndarray, data: Dataset, h: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient oracle, (f(w + h e_i) - f(w - h e_i)) / 2h."""
    if h <= 0:
        raise ValueError(f"finite-difference step must be > 0, got {h}")
    _check_dims(obj, weights)
    out = np.empty_like(weights)
    probe = weights.astype(np.float64).copy()
    for i in range(weights.size):
        orig = probe[i]
        probe[i] = orig + h
        fp = evaluate(obj, probe, batch, data)
        probe[i] = orig - h
        fm = evaluate(obj, probe, batch, data)
        probe[i] = orig
        out[i] = (fp - fm) / (2.0 * h)
    return out


def heldout_loss(obj: Objective, weights: np.ndarray, data: Dataset) -> float:
    """Mean data loss over the held-out split (no regularization term)."""
    _check_dims(obj, weights)
    x = data.inputs[data.heldout_indices]
    y = data.targets[data.heldout_indices]
    return _data_loss(obj, weights, x, y)


def solve_quadratic_minimizer(obj: QuadraticObjective, data: Dataset) -> np.ndarray:
    """Direct-elimination solution of the full-training-set quadratic.

    The mean training cost is 0.5 w.A.w - b.w with A = I + X^T X / n (+ reg I)
    and b the feature mean; the minimizer solves A w = b.
    """
    x = data.inputs[data.train_indices]
    n = len(data.train_indices)
    a = np.eye(obj.input_dim) * (1.0 + obj.regularization) + x.T @ x / n
    b = np.mean(x, axis=0)
    return np.linalg.solve(a, b)


def initial_weights(obj: Objective, seed: int) -> np.ndarray:
    """Deterministic starting point shared by every learner of a run."""
    # Epoch shuffles use (seed, epoch) with epoch >= 1, so (seed, 0) is free.
    rng = np.random.default_rng((seed, 0))
    return 0.1 * rng.standard_normal(obj.param_dim)
