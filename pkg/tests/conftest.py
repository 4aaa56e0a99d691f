import numpy as np
import pytest

from fairpen.data import ColumnSchema, TabularDataset
from fairpen.nn import sigmoid


def binary_toy_dataset(n: int, seed: int = 0, a_rate: float = 0.5) -> TabularDataset:
    """Binary (A, Y) with two informative continuous features."""
    rng = np.random.default_rng(seed)
    a = (rng.random(n) < a_rate).astype(np.float64)
    x1 = a + rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    y = (rng.random(n) < sigmoid(x1 + 0.5 * x2)).astype(np.float64)
    schema = [
        ColumnSchema("x1", "feature", "continuous"),
        ColumnSchema("x2", "feature", "continuous"),
        ColumnSchema("a", "sensitive", "binary"),
        ColumnSchema("y", "outcome", "binary"),
    ]
    features = np.column_stack([x1, x2])
    return TabularDataset(features, a.reshape(-1, 1), a.reshape(-1, 1), y, schema, ["x1", "x2"])


def conditional_independent_toy(n: int, seed: int = 0) -> TabularDataset:
    """Binary feature depending on Y only; A independent of (X, Y).

    By construction any score h(X) is independent of A given Y.
    """
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n).astype(np.float64)
    a = rng.integers(0, 2, size=n).astype(np.float64)
    x = (rng.random(n) < 0.2 + 0.6 * y).astype(np.float64)
    schema = [
        ColumnSchema("x", "feature", "binary"),
        ColumnSchema("a", "sensitive", "binary"),
        ColumnSchema("y", "outcome", "binary"),
    ]
    return TabularDataset(x.reshape(-1, 1), a.reshape(-1, 1), a.reshape(-1, 1), y, schema, ["x"])


@pytest.fixture
def toy_dataset():
    return binary_toy_dataset(200, seed=0)
