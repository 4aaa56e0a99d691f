"""Alternating min-max trainers for the independence and separation
penalties, with periodic metric snapshots for Pareto analysis."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import metrics
from .data import TabularDataset, minibatch_construct
from .errors import ConfigError, DegenerateMetricError, UndefinedMetricError
from .nn import Mlp, bce_loss, mae_loss
from .penalties import (
    DensityRatioEstimator,
    GeoDiscriminator,
    GspDiscriminator,
    geo_penalty,
    gsp_penalty,
    pretrain_density_ratio,
)


@dataclass
class TrainConfig:
    lam: float
    T: int
    learning_rate: float = 0.005
    T_prime: int = 1
    L: int = 1000
    n_b: int = 100
    eval_interval: int = 100
    seed: int = 0
    sampler: str = "within_batch"
    task: str = "binary_classification"
    scaling: str = "convex"  # convex: (1-lam)*utility + lam*penalty; plain: utility + lam*penalty

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lam must be in [0, 1], got {self.lam}")
        for name in ("T", "T_prime", "L", "n_b", "eval_interval"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.sampler not in ("within_batch", "disjoint"):
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if self.task not in ("binary_classification", "regression"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.scaling not in ("convex", "plain"):
            raise ConfigError(f"unknown scaling {self.scaling!r}")

    def weights(self) -> tuple[float, float]:
        if self.scaling == "convex":
            return 1.0 - self.lam, self.lam
        return 1.0, self.lam


@dataclass
class Snapshot:
    iteration: int
    split: str
    report: metrics.FairnessReport
    checkpoint_id: str


@dataclass
class TrainResult:
    snapshots: list[Snapshot]
    h: Mlp
    discriminator: Mlp
    beta: DensityRatioEstimator | None = None


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent init/batch/sampler streams derived from one master seed."""
    init_ss, batch_ss, sampler_ss = np.random.SeedSequence(seed).spawn(3)
    return {
        "init": np.random.default_rng(init_ss),
        "batch": np.random.default_rng(batch_ss),
        "sampler": np.random.default_rng(sampler_ss),
    }


def _utility_loss(task: str):
    return bce_loss if task == "binary_classification" else mae_loss


def evaluate_snapshot(h: Mlp, dataset: TabularDataset, task: str) -> metrics.FairnessReport:
    """Utility plus every applicable fairness metric, h in inference mode.

    Degenerate groups or rates yield NaN for the affected metric instead of
    an error, so evaluation never aborts a run.
    """
    scores = h.forward(dataset.X, train=False)[:, 0]
    y = dataset.Y
    continuous_y = dataset.outcome_column.kind == "continuous"
    y_grid = metrics.quantile_grid(y) if continuous_y else None

    if task == "binary_classification":
        try:
            utility = metrics.auc(scores, y)
            threshold = metrics.choose_threshold(scores, y)
        except UndefinedMetricError:
            utility, threshold = float("nan"), None
        yhat = scores > (threshold if threshold is not None else 0.5)
        values = yhat.astype(np.float64)
        report = metrics.FairnessReport("auc", utility, threshold)
    else:
        report = metrics.FairnessReport("mae", metrics.mae(scores, y), None)
        values = scores

    for col in dataset.sensitive_columns:
        a = dataset.sensitive_raw(col.name)
        attr = metrics.AttributeReport(name=col.name)
        if col.kind == "continuous":
            grid = metrics.quantile_grid(a)
            attr.group_count = len(grid.values)
            attr.sp = _safe(metrics.sp_continuous, values, a, grid)
            attr.ks_gsp = _safe(metrics.ks_gsp, scores, a, "continuous", grid)
            attr.eo = _safe(metrics.eo_continuous, values, a, y, grid, y_grid)
            attr.ks_geo = _safe(metrics.ks_geo, scores, a, y, "continuous", grid, y_grid)
        else:
            groups = np.unique(a)
            attr.group_count = len(groups)
            attr.ks_gsp = _safe(metrics.ks_gsp, scores, a, "discrete")
            attr.ks_geo = _safe(
                metrics.ks_geo, scores, a, y, "discrete", None, y_grid
            )
            binary_a = set(groups) <= {0.0, 1.0}
            if binary_a:
                attr.sp = _safe(metrics.sp_discrete, values, a)
                if not continuous_y:
                    attr.eo = _safe(metrics.eo_discrete, values, a, y)
        report.attributes[col.name] = attr
    return report


def _safe(fn, *args) -> float:
    try:
        return fn(*args)
    except DegenerateMetricError:
        return float("nan")


def _snapshot_iterations(T: int, interval: int) -> list[int]:
    its = list(range(interval, T + 1, interval))
    if not its or its[-1] != T:
        its.append(T)
    return its


def _record_snapshots(
    snapshots: list[Snapshot],
    h: Mlp,
    t: int,
    train_set: TabularDataset,
    val_set: TabularDataset,
    task: str,
    checkpoint_dir,
) -> None:
    ckpt_id = f"iter{t:06d}"
    if checkpoint_dir is not None:
        h.save(f"{checkpoint_dir}/h_{ckpt_id}.ckpt")
    for split, data in (("train", train_set), ("validation", val_set)):
        snapshots.append(Snapshot(t, split, evaluate_snapshot(h, data, task), ckpt_id))


def train_gsp(
    train_set: TabularDataset,
    val_set: TabularDataset,
    h: Mlp,
    D: GspDiscriminator,
    config: TrainConfig,
    update_hook: Callable[[str, int], None] | None = None,
    checkpoint_dir=None,
) -> TrainResult:
    """Alternating ascent on the discriminator and descent on the scorer
    under (1-lam)*utility + lam*penalty (convex scaling)."""
    streams = rng_streams(config.seed)
    batch_rng, sampler_rng = streams["batch"], streams["sampler"]
    loss_fn = _utility_loss(config.task)
    lam_m, lam_f = config.weights()
    eval_at = set(_snapshot_iterations(config.T, config.eval_interval))
    snapshots: list[Snapshot] = []

    for t in range(1, config.T + 1):
        mb = minibatch_construct(train_set, config.n_b, config.sampler, batch_rng, sampler_rng)
        s = h.forward(mb.x, train=True)

        for _ in range(config.T_prime):
            gsp_penalty(D, s, mb.a, mb.a_prime, train=True)
            D.net.sgd_step(config.learning_rate, maximize=True)
            if update_hook:
                update_hook("D", t)

        _, grad_p = loss_fn(s[:, 0], mb.y)
        grad_s = lam_m * grad_p.reshape(-1, 1)
        if lam_f > 0.0:
            _, pen_grad_s = gsp_penalty(D, s, mb.a, mb.a_prime, train=True)
            D.net.zero_grads()
            grad_s = grad_s + lam_f * pen_grad_s
        h.backward(grad_s)
        h.sgd_step(config.learning_rate)
        if update_hook:
            update_hook("h", t)

        if t in eval_at:
            _record_snapshots(snapshots, h, t, train_set, val_set, config.task, checkpoint_dir)

    return TrainResult(snapshots, h, D.net)


def train_geo(
    train_set: TabularDataset,
    val_set: TabularDataset,
    h: Mlp,
    D: GeoDiscriminator,
    config: TrainConfig,
    beta: DensityRatioEstimator | None = None,
    update_hook: Callable[[str, int], None] | None = None,
    checkpoint_dir=None,
) -> TrainResult:
    """Two-phase trainer: density-ratio pre-training, then the alternating
    loop with the outcome-conditioned penalty. Pass ``beta`` to skip the
    pre-training phase (e.g. the constant-1 no-weight ablation)."""
    if beta is None:
        beta = pretrain_density_ratio(
            train_set,
            L=config.L,
            n_b=config.n_b,
            learning_rate=config.learning_rate,
            seed=config.seed + 1,
            sampler=config.sampler,
        )
    streams = rng_streams(config.seed)
    batch_rng, sampler_rng = streams["batch"], streams["sampler"]
    loss_fn = _utility_loss(config.task)
    lam_m, lam_f = config.weights()
    eval_at = set(_snapshot_iterations(config.T, config.eval_interval))
    snapshots: list[Snapshot] = []

    for t in range(1, config.T + 1):
        mb = minibatch_construct(train_set, config.n_b, config.sampler, batch_rng, sampler_rng)
        s = h.forward(mb.x, train=True)

        for _ in range(config.T_prime):
            geo_penalty(D, beta, s, mb.a, mb.y, mb.a_prime, train=True)
            D.net.sgd_step(config.learning_rate, maximize=True)
            if update_hook:
                update_hook("D", t)

        _, grad_p = loss_fn(s[:, 0], mb.y)
        grad_s = lam_m * grad_p.reshape(-1, 1)
        if lam_f > 0.0:
            _, pen_grad_s = geo_penalty(D, beta, s, mb.a, mb.y, mb.a_prime, train=True)
            D.net.zero_grads()
            grad_s = grad_s + lam_f * pen_grad_s
        h.backward(grad_s)
        h.sgd_step(config.learning_rate)
        if update_hook:
            update_hook("h", t)

        if t in eval_at:
            _record_snapshots(snapshots, h, t, train_set, val_set, config.task, checkpoint_dir)

    return TrainResult(snapshots, h, D.net, beta=beta)


def snapshot_csv_rows(snapshots: list[Snapshot], attr_names: list[str]):
    header = ["iteration", "split", "utility_name", "utility_value"]
    for name in attr_names:
        header += [f"{name}_sp", f"{name}_ks_gsp", f"{name}_eo", f"{name}_ks_geo"]
    yield header
    for snap in snapshots:
        row = [
            str(snap.iteration),
            snap.split,
            snap.report.utility_name,
            repr(snap.report.utility_value),
        ]
        for name in attr_names:
            attr = snap.report.attributes.get(name)
            for value in (attr.sp, attr.ks_gsp, attr.eo, attr.ks_geo):
                row.append("" if value is None else repr(value))
        yield row


def write_snapshot_csv(snapshots: list[Snapshot], attr_names: list[str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerows(snapshot_csv_rows(snapshots, attr_names))
