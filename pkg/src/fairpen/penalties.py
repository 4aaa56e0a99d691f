"""Adversarial fairness penalties and the density-ratio weight estimator.

The independence penalty feeds a discriminator real (score, attribute)
pairs and pairs whose attribute was resampled from its marginal; the
separation penalty additionally conditions on the outcome and reweights
the resampled term by an odds-based density-ratio estimate.
"""

from __future__ import annotations

import numpy as np

from .data import TabularDataset, minibatch_construct
from .errors import DimensionError, StateError
from .nn import Mlp, clamp_prob, mlp

# Discriminator inputs concatenate (score, attributes, outcome) in that order.


class GspDiscriminator:
    """D(s, a) -> (0,1); input width 1 + l."""

    def __init__(self, net: Mlp):
        self.net = net

    @classmethod
    def default(cls, l: int, rng: np.random.Generator, hidden: tuple[int, ...] = (64, 64)):
        return cls(mlp(1 + l, list(hidden), rng=rng, batch_norm=True))

    def probability(self, s: np.ndarray, a: np.ndarray, train: bool = False) -> np.ndarray:
        return self.net.forward(np.column_stack([s, a]), train=train)[:, 0]


class GeoDiscriminator:
    """D(s, a, y) -> (0,1); input width 1 + l + 1."""

    def __init__(self, net: Mlp):
        self.net = net

    @classmethod
    def default(cls, l: int, rng: np.random.Generator, hidden: tuple[int, ...] = (64, 64)):
        return cls(mlp(1 + l + 1, list(hidden), rng=rng, batch_norm=True))

    def probability(self, s, a, y, train: bool = False) -> np.ndarray:
        return self.net.forward(np.column_stack([s, a, y]), train=train)[:, 0]


class DensityRatioEstimator:
    """beta(a, y) = p(a,y) / (p(a)p(y)), via a classifier's odds, an
    empirical pmf table, or a constant (the no-weight ablation)."""

    def __init__(self, net: Mlp | None = None, table: dict | None = None,
                 constant: float | None = None, frozen: bool = False):
        sources = sum(x is not None for x in (net, table, constant))
        if sources != 1:
            raise ValueError("exactly one of net/table/constant required")
        self.net = net
        self.table = table
        self.constant = constant
        self.frozen = frozen

    def values(self, a: np.ndarray, y: np.ndarray) -> np.ndarray:
        if not self.frozen:
            raise StateError("density-ratio estimator must be frozen before use")
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        y = np.asarray(y, dtype=np.float64).ravel()
        if self.constant is not None:
            return np.full(len(y), self.constant)
        if self.table is not None:
            # unseen (a, y) cells get the neutral weight 1
            return np.array(
                [self.table.get(tuple(row) + (yv,), 1.0) for row, yv in zip(a, y)]
            )
        d = clamp_prob(self.net.forward(np.column_stack([a, y]))[:, 0])
        return d / (1.0 - d)


def beta_value(estimator: DensityRatioEstimator, a: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Odds transform of the estimator's output at (a, y)."""
    return estimator.values(a, y)


def gsp_penalty(
    D: GspDiscriminator,
    s: np.ndarray,
    a: np.ndarray,
    a_prime: np.ndarray,
    train: bool = True,
) -> tuple[float, np.ndarray]:
    """mean[log D(s,a) + log(1 - D(s,a'))].

    Returns (value, gradient w.r.t. s); the gradient w.r.t. D's parameters
    is accumulated into D's grad buffers (clear them if only the s-gradient
    is wanted). The s-gradient flows through both log terms.
    """
    s = np.asarray(s, dtype=np.float64).reshape(-1, 1)
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    a_prime = np.atleast_2d(np.asarray(a_prime, dtype=np.float64))
    if not (len(s) == len(a) == len(a_prime)):
        raise DimensionError("s, a, a_prime must have equal row counts")
    n = len(s)

    # One combined forward so batch-norm statistics are shared between the
    # real and resampled halves (separate passes let D discriminate on
    # batch statistics alone and collapse the penalty).
    both = np.vstack([np.column_stack([s, a]), np.column_stack([s, a_prime])])
    p = clamp_prob(D.net.forward(both, train=train))
    p_real, p_fake = p[:n], p[n:]
    upstream = np.vstack([1.0 / (n * p_real), -1.0 / (n * (1.0 - p_fake))])
    grad_in = D.net.backward(upstream)

    value = float(np.mean(np.log(p_real) + np.log(1.0 - p_fake)))
    grad_s = grad_in[:n, :1] + grad_in[n:, :1]
    return value, grad_s


def geo_penalty(
    D: GeoDiscriminator,
    beta: DensityRatioEstimator,
    s: np.ndarray,
    a: np.ndarray,
    y: np.ndarray,
    a_prime: np.ndarray,
    train: bool = True,
) -> tuple[float, np.ndarray]:
    """mean[log D(s,a,y) + beta(a,y) log(1 - D(s,a',y))].

    The weight is evaluated at the batch's real (a, y) pairs and does not
    receive gradients. Same gradient contract as ``gsp_penalty``.
    """
    if not beta.frozen:
        raise StateError("beta estimator must be frozen before penalty evaluation")
    s = np.asarray(s, dtype=np.float64).reshape(-1, 1)
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    a_prime = np.atleast_2d(np.asarray(a_prime, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    if not (len(s) == len(a) == len(a_prime) == len(y)):
        raise DimensionError("s, a, y, a_prime must have equal row counts")
    n = len(s)
    w = beta.values(a, y).reshape(-1, 1)

    both = np.vstack(
        [np.column_stack([s, a, y]), np.column_stack([s, a_prime, y])]
    )
    p = clamp_prob(D.net.forward(both, train=train))
    p_real, p_fake = p[:n], p[n:]
    upstream = np.vstack([1.0 / (n * p_real), -w / (n * (1.0 - p_fake))])
    grad_in = D.net.backward(upstream)

    value = float(np.mean(np.log(p_real) + w * np.log(1.0 - p_fake)))
    grad_s = grad_in[:n, :1] + grad_in[n:, :1]
    return value, grad_s


def pretrain_density_ratio(
    dataset: TabularDataset,
    L: int,
    n_b: int = 100,
    learning_rate: float = 0.005,
    seed: int = 0,
    sampler: str = "within_batch",
    hidden: tuple[int, ...] = (64, 64),
    net: Mlp | None = None,
) -> DensityRatioEstimator:
    """Train the ratio classifier by ascent on
    mean[log D(a,y) + log(1 - D(a',y))] for L iterations; returns it frozen."""
    init_ss, batch_ss, sampler_ss = np.random.SeedSequence(seed).spawn(3)
    if net is None:
        # no batch-norm in the ratio classifier
        net = mlp(dataset.l + 1, list(hidden), rng=np.random.default_rng(init_ss), batch_norm=False)
    batch_rng = np.random.default_rng(batch_ss)
    sampler_rng = np.random.default_rng(sampler_ss)
    for _ in range(L):
        mb = minibatch_construct(dataset, n_b, sampler, batch_rng, sampler_rng)
        n = len(mb.y)
        both = np.vstack(
            [np.column_stack([mb.a, mb.y]), np.column_stack([mb.a_prime, mb.y])]
        )
        p = clamp_prob(net.forward(both, train=True))
        upstream = np.vstack([1.0 / (n * p[:n]), -1.0 / (n * (1.0 - p[n:]))])
        net.backward(upstream)
        net.sgd_step(learning_rate, maximize=True)
    return DensityRatioEstimator(net=net, frozen=True)


def empirical_pmf_ratio(dataset: TabularDataset) -> DensityRatioEstimator:
    """Plug-in ratio p(a,y)/(p(a)p(y)) from empirical counts (discrete A, Y)."""
    for col in dataset.sensitive_columns:
        if col.kind == "continuous":
            raise ValueError(f"sensitive column {col.name!r} is continuous")
    if dataset.outcome_column.kind == "continuous":
        raise ValueError("outcome column is continuous")
    n = dataset.n
    joint: dict[tuple, float] = {}
    marg_a: dict[tuple, float] = {}
    marg_y: dict[float, float] = {}
    for row, yv in zip(dataset.A, dataset.Y):
        ka, ky = tuple(row), float(yv)
        joint[ka + (ky,)] = joint.get(ka + (ky,), 0.0) + 1.0 / n
        marg_a[ka] = marg_a.get(ka, 0.0) + 1.0 / n
        marg_y[ky] = marg_y.get(ky, 0.0) + 1.0 / n
    table = {
        key: p / (marg_a[key[:-1]] * marg_y[key[-1]]) for key, p in joint.items()
    }
    return DensityRatioEstimator(table=table, frozen=True)


def optimal_gsp_discriminator_oracle(joint_pmf: np.ndarray) -> np.ndarray:
    """Exact optimal discriminator on a finite (s, a) joint:
    D*(s,a) = p(s,a) / (p(s,a) + p(s)p(a)). Test oracle, not used in training."""
    pmf = np.asarray(joint_pmf, dtype=np.float64)
    if pmf.ndim != 2 or (pmf < 0).any() or abs(pmf.sum() - 1.0) > 1e-12:
        raise ValueError("joint pmf must be a nonnegative 2-D table summing to 1")
    p_s = pmf.sum(axis=1, keepdims=True)
    p_a = pmf.sum(axis=0, keepdims=True)
    return pmf / (pmf + p_s * p_a)
