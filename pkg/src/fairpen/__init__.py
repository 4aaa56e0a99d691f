"""Fairness-penalized supervised learning with a resampled-attribute
adversarial penalty, plus the matching evaluation suite."""

from .data import ColumnSchema, TabularDataset, load_csv, minibatch_construct, split_train_val
from .metrics import FairnessReport, pareto_frontier, topk_fair_summary
from .nn import Mlp, mlp
from .penalties import (
    DensityRatioEstimator,
    GeoDiscriminator,
    GspDiscriminator,
    empirical_pmf_ratio,
    geo_penalty,
    gsp_penalty,
    pretrain_density_ratio,
)
from .training import TrainConfig, TrainResult, evaluate_snapshot, train_geo, train_gsp

__all__ = [
    "ColumnSchema",
    "DensityRatioEstimator",
    "FairnessReport",
    "GeoDiscriminator",
    "GspDiscriminator",
    "Mlp",
    "TabularDataset",
    "TrainConfig",
    "TrainResult",
    "empirical_pmf_ratio",
    "evaluate_snapshot",
    "geo_penalty",
    "gsp_penalty",
    "load_csv",
    "minibatch_construct",
    "mlp",
    "pareto_frontier",
    "pretrain_density_ratio",
    "split_train_val",
    "topk_fair_summary",
    "train_geo",
    "train_gsp",
]
