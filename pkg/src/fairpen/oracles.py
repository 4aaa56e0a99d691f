"""Closed-form reference generators and brute-force checkers.

These ship with the library (not only in tests) so the ``ratio-toy`` CLI
command can reproduce the density-ratio toy experiment, and so every
checker stays independent of the code path it validates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ColumnSchema, TabularDataset
from .errors import DegenerateMetricError
from .nn import sigmoid


@dataclass(frozen=True)
class DiscreteJoint:
    """Finite joint pmf with named supports per variable."""

    supports: tuple[tuple[float, ...], ...]
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.float64)
        if t.shape != tuple(len(s) for s in self.supports):
            raise ValueError("table shape does not match supports")
        if (t < 0).any() or abs(t.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")


def table5_toy(n: int, seed: int = 0) -> TabularDataset:
    """i.i.d. samples of (A, Y) with A ~ Bern(0.5) and P(Y=1|A=a) = sigma(a).

    The single feature column is constant; only (A, Y) matter here.
    """
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, size=n).astype(np.float64)
    y = (rng.random(n) < sigmoid(a)).astype(np.float64)
    schema = [
        ColumnSchema("x0", "feature", "continuous"),
        ColumnSchema("a", "sensitive", "binary"),
        ColumnSchema("y", "outcome", "binary"),
    ]
    features = np.zeros((n, 1))
    return TabularDataset(features, a.reshape(-1, 1), a.reshape(-1, 1), y, schema, ["x0"])


def table5_true_ratios() -> dict[tuple[int, int], float]:
    """Analytic p(y|a)/p(y) for the toy law, keyed by (a, y)."""
    p_y1_given = {0: float(sigmoid(np.array([0.0]))[0]), 1: float(sigmoid(np.array([1.0]))[0])}
    p_y1 = 0.5 * (p_y1_given[0] + p_y1_given[1])
    out = {}
    for a in (0, 1):
        out[(a, 1)] = p_y1_given[a] / p_y1
        out[(a, 0)] = (1.0 - p_y1_given[a]) / (1.0 - p_y1)
    return out


@dataclass(frozen=True)
class SyntheticBiasSpec:
    """Synthetic (X, A, Y) with tunable dependence of the informative
    feature on the sensitive attribute."""

    n: int
    rho: float
    noise: float = 1.0
    seed: int = 0


def synth_bias(spec: SyntheticBiasSpec) -> TabularDataset:
    """A ~ U[0,1]; x1 = rho*(2A - 1) + noise*eps; Y ~ Bern(sigma(3*x1 + x2)).

    rho = 0 makes x1 (and hence the Bayes score) independent of A; large
    rho makes the optimal unpenalized scorer strongly A-dependent.
    """
    rng = np.random.default_rng(spec.seed)
    a = rng.random(spec.n)
    x1 = spec.rho * (2.0 * a - 1.0) + spec.noise * rng.standard_normal(spec.n)
    x2 = rng.standard_normal(spec.n)
    y = (rng.random(spec.n) < sigmoid(3.0 * x1 + x2)).astype(np.float64)
    schema = [
        ColumnSchema("x1", "feature", "continuous"),
        ColumnSchema("x2", "feature", "continuous"),
        ColumnSchema("a", "sensitive", "continuous"),
        ColumnSchema("y", "outcome", "binary"),
    ]
    features = np.column_stack([x1, x2])
    return TabularDataset(
        features, a.reshape(-1, 1), a.reshape(-1, 1), y, schema, ["x1", "x2"]
    )


def brute_force_ks(scores: np.ndarray, group_mask: np.ndarray) -> float:
    """Max over all real thresholds of |CDF_group - CDF_all|, enumerated at
    observed values and midpoints. Independent of the metrics module."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    mask = np.asarray(group_mask, dtype=bool).ravel()
    if not mask.any():
        raise DegenerateMetricError("empty group")
    grid = np.unique(s)
    thresholds = np.concatenate([grid, (grid[:-1] + grid[1:]) / 2.0, [grid[0] - 1.0, grid[-1] + 1.0]])
    best = 0.0
    group = s[mask]
    for t in thresholds:
        gap = abs(np.mean(group <= t) - np.mean(s <= t))
        best = max(best, gap)
    return float(best)


def exact_geo_discriminator_oracle(joint_pmf: np.ndarray, beta_table: np.ndarray) -> np.ndarray:
    """Exact optimal outcome-conditioned discriminator on a finite
    (s, a, y) joint with resampled attributes:

        D*(s,a,y) = p(s|a,y) / (p(s|a,y) + beta(a,y) p(s|y) p(a)p(y)/p(a,y))
    """
    p = np.asarray(joint_pmf, dtype=np.float64)
    beta = np.asarray(beta_table, dtype=np.float64)
    if p.ndim != 3 or (p < 0).any() or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("joint pmf must be a nonnegative 3-D table summing to 1")
    if beta.shape != p.shape[1:] or (beta <= 0).any():
        raise ValueError("beta table must be positive with shape (|A|, |Y|)")
    p_ay = p.sum(axis=0)  # (A, Y)
    p_a = p.sum(axis=(0, 2))
    p_y = p.sum(axis=(0, 1))
    p_s_given_ay = p / p_ay[None, :, :]
    p_s_given_y = p.sum(axis=1) / p_y[None, :]  # (S, Y)
    ratio = p_a[:, None] * p_y[None, :] / p_ay  # p(a)p(y)/p(a,y)
    denom = p_s_given_ay + beta[None, :, :] * p_s_given_y[:, None, :] * ratio[None, :, :]
    return p_s_given_ay / denom
