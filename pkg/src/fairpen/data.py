"""Tabular ingestion, encoding, splitting, and minibatch construction.

Encoding conventions: non-sensitive continuous features are z-scored by
training-split statistics; categorical features are one-hot; continuous
sensitive columns are min-max scaled into [0, 1]; a two-category sensitive
column is encoded {0, 1} in declared category order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, IngestionError


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    role: str  # feature | sensitive | outcome
    kind: str  # continuous | binary | categorical
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.role not in ("feature", "sensitive", "outcome"):
            raise IngestionError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.kind not in ("continuous", "binary", "categorical"):
            raise IngestionError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical" and not self.categories:
            raise IngestionError(f"column {self.name!r}: categorical without categories")


def validate_schema(schema: list[ColumnSchema]) -> None:
    outcomes = [c for c in schema if c.role == "outcome"]
    if len(outcomes) != 1:
        raise IngestionError(f"schema must declare exactly one outcome column, got {len(outcomes)}")
    if not any(c.role == "sensitive" for c in schema):
        raise IngestionError("schema must declare at least one sensitive column")


@dataclass(frozen=True)
class FeatureScaling:
    """Per-encoded-feature-column z-score statistics."""

    mean: np.ndarray
    std: np.ndarray


class TabularDataset:
    """Immutable columns: encoded features X, sensitive block A, outcome Y.

    Raw (pre-scaling) values are retained so splits can re-standardize
    features with their own training statistics and so metrics can group
    on original sensitive values.
    """

    def __init__(
        self,
        raw_features: np.ndarray,
        A: np.ndarray,
        A_raw: np.ndarray,
        Y: np.ndarray,
        schema: list[ColumnSchema],
        feature_names: list[str],
        scaling: FeatureScaling | None = None,
    ):
        validate_schema(schema)
        self._raw_features = raw_features
        if scaling is None:
            mean = raw_features.mean(axis=0) if len(raw_features) else np.zeros(raw_features.shape[1])
            std = raw_features.std(axis=0) if len(raw_features) else np.ones(raw_features.shape[1])
            scaling = FeatureScaling(mean, np.where(std > 0, std, 1.0))
        self.scaling = scaling
        self.X = (raw_features - scaling.mean) / scaling.std
        self.A = A
        self.A_raw = A_raw
        self.Y = Y
        self.schema = list(schema)
        self.feature_names = list(feature_names)
        for arr in (self._raw_features, self.X, self.A, self.A_raw, self.Y):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def l(self) -> int:
        return self.A.shape[1]

    @property
    def sensitive_columns(self) -> list[ColumnSchema]:
        return [c for c in self.schema if c.role == "sensitive"]

    @property
    def outcome_column(self) -> ColumnSchema:
        return next(c for c in self.schema if c.role == "outcome")

    def sensitive_raw(self, name: str) -> np.ndarray:
        """Original (unscaled, label-encoded) values of one sensitive column."""
        idx = [c.name for c in self.sensitive_columns].index(name)
        return self.A_raw[:, idx]

    def destandardized_features(self) -> np.ndarray:
        return self.X * self.scaling.std + self.scaling.mean

    def take(self, indices: np.ndarray, scaling: FeatureScaling | None = None) -> "TabularDataset":
        return TabularDataset(
            self._raw_features[indices].copy(),
            self.A[indices].copy(),
            self.A_raw[indices].copy(),
            self.Y[indices].copy(),
            self.schema,
            self.feature_names,
            scaling=scaling,
        )


@dataclass(frozen=True)
class Minibatch:
    x: np.ndarray
    a: np.ndarray
    y: np.ndarray
    a_prime: np.ndarray


def _parse_cell(raw: str, col: ColumnSchema, row_no: int) -> float | None:
    text = raw.strip()
    if text == "":
        raise IngestionError(f"row {row_no}, column {col.name!r}: missing value")
    if col.kind == "categorical":
        if text not in col.categories:
            raise IngestionError(
                f"row {row_no}, column {col.name!r}: unknown category {text!r}"
            )
        return float(col.categories.index(text))
    try:
        value = float(text)
    except ValueError:
        raise IngestionError(
            f"row {row_no}, column {col.name!r}: unparseable cell {text!r}"
        ) from None
    if col.kind == "binary" and value not in (0.0, 1.0):
        raise IngestionError(
            f"row {row_no}, column {col.name!r}: binary cell must be 0 or 1, got {text!r}"
        )
    return value


def _encode_block(values: np.ndarray, cols: list[ColumnSchema], one_hot: bool, minmax_continuous: bool):
    """Expand label-encoded columns into the numeric design block."""
    out_cols: list[np.ndarray] = []
    names: list[str] = []
    for j, col in enumerate(cols):
        v = values[:, j]
        if col.kind == "categorical" and len(col.categories) > 2 and one_hot:
            for k, cat in enumerate(col.categories):
                out_cols.append((v == k).astype(np.float64))
                names.append(f"{col.name}={cat}")
        elif col.kind == "continuous" and minmax_continuous:
            lo, hi = v.min(), v.max()
            span = hi - lo if hi > lo else 1.0
            out_cols.append((v - lo) / span)
            names.append(col.name)
        else:
            out_cols.append(v.astype(np.float64))
            names.append(col.name)
    block = np.column_stack(out_cols) if out_cols else np.zeros((len(values), 0))
    return block, names


def load_csv(path, schema: list[ColumnSchema]) -> TabularDataset:
    validate_schema(schema)
    by_name = {c.name: c for c in schema}
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        missing = [c.name for c in schema if c.name not in header]
        if missing:
            raise IngestionError(f"{path}: missing columns {missing}")
        positions = {c.name: header.index(c.name) for c in schema}
        rows = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            parsed = [
                _parse_cell(row[positions[c.name]], c, row_no) for c in schema
            ]
            rows.append(parsed)
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    table = np.array(rows, dtype=np.float64)

    feat_cols = [c for c in schema if c.role == "feature"]
    sens_cols = [c for c in schema if c.role == "sensitive"]
    out_col = next(c for c in schema if c.role == "outcome")
    col_idx = {c.name: i for i, c in enumerate(schema)}

    feat_vals = table[:, [col_idx[c.name] for c in feat_cols]]
    sens_vals = table[:, [col_idx[c.name] for c in sens_cols]]
    y = table[:, col_idx[out_col.name]].copy()
    if out_col.kind == "continuous":
        lo, hi = y.min(), y.max()
        span = hi - lo if hi > lo else 1.0
        y = (y - lo) / span

    features, feature_names = _encode_block(feat_vals, feat_cols, one_hot=True, minmax_continuous=False)
    A, _ = _encode_block(sens_vals, sens_cols, one_hot=True, minmax_continuous=True)
    return TabularDataset(features, A, sens_vals.copy(), y, schema, feature_names)


def split_train_val(dataset: TabularDataset, fraction: float = 0.8, seed: int = 0):
    """Seeded shuffle split; feature scaling refit on the training part."""
    if dataset.n < 2:
        raise DimensionError("need at least 2 rows to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(dataset.n)
    n_train = int(np.floor(fraction * dataset.n))
    train_idx, val_idx = order[:n_train], order[n_train:]
    raw_train = dataset._raw_features[train_idx]
    mean = raw_train.mean(axis=0)
    std = raw_train.std(axis=0)
    scaling = FeatureScaling(mean, np.where(std > 0, std, 1.0))
    return dataset.take(train_idx, scaling), dataset.take(val_idx, scaling)


def minibatch_construct(
    dataset: TabularDataset,
    n_b: int,
    sampler: str,
    rng: np.random.Generator,
    sampler_rng: np.random.Generator | None = None,
) -> Minibatch:
    """Draw (x, a, y) without replacement and pair it with resampled a'.

    ``within_batch``: a' is a uniform permutation of the batch's own a rows.
    ``disjoint``: a' comes from a second draw disjoint from the batch.
    Batch indices come from ``rng``; the a' draw uses ``sampler_rng``.
    """
    if sampler not in ("within_batch", "disjoint"):
        raise ValueError(f"unknown sampler {sampler!r}")
    if n_b > dataset.n:
        raise DimensionError(f"batch size {n_b} exceeds dataset size {dataset.n}")
    if sampler == "disjoint" and dataset.n < 2 * n_b:
        raise DimensionError(
            f"disjoint sampler needs n >= 2*n_b, got n={dataset.n}, n_b={n_b}"
        )
    sampler_rng = sampler_rng if sampler_rng is not None else rng
    idx = rng.choice(dataset.n, size=n_b, replace=False)
    if sampler == "within_batch":
        a_prime = dataset.A[idx][sampler_rng.permutation(n_b)]
    else:
        rest = np.setdiff1d(np.arange(dataset.n), idx)
        idx2 = sampler_rng.choice(rest, size=n_b, replace=False)
        a_prime = dataset.A[idx2]
    return Minibatch(dataset.X[idx], dataset.A[idx], dataset.Y[idx], a_prime)


class EmpiricalMarginal:
    """I.i.d. row draws from the observed sensitive-attribute rows."""

    def __init__(self, rows: np.ndarray):
        self.rows = rows

    def draw(self, k: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, len(self.rows), size=k)
        return self.rows[idx]


def marginal_of_A(dataset: TabularDataset) -> EmpiricalMarginal:
    return EmpiricalMarginal(dataset.A)
