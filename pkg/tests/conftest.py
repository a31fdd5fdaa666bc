import numpy as np
import pytest

from distsgd import Dataset, make_dataset


def zero_feature_dataset(n: int = 100, dim: int = 5) -> Dataset:
    """All-zero inputs: the quadratic batch cost reduces to the pure bowl
    0.5*||w||^2 (the A = I, b = 0 instance) with batch-independent gradients."""
    n_heldout = n // 10
    return Dataset(
        inputs=np.zeros((n, dim)),
        targets=np.zeros(n),
        train_indices=np.arange(n - n_heldout),
        heldout_indices=np.arange(n - n_heldout, n),
    )


@pytest.fixture
def logistic_problem():
    from distsgd import make_objective

    data = make_dataset("logistic", 500, 8, seed=3)
    return make_objective("logistic", 8), data


@pytest.fixture
def quadratic_problem():
    from distsgd import make_objective

    data = make_dataset("quadratic", 400, 5, seed=1)
    return make_objective("quadratic", 5), data
