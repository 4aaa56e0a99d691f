"""Command-line front-end: train, evaluate, pareto, ratio-toy."""

from __future__ import annotations

import os

# Cap numpy's internal threading before it is imported anywhere below.
if os.environ.get("FAIRPEN_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["FAIRPEN_THREADS"])

import argparse
import configparser
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics, oracles, penalties, training
from .data import ColumnSchema, load_csv, split_train_val
from .errors import ConfigError, FairpenError
from .nn import Mlp, clamp_prob, mlp
from .training import TrainConfig, rng_streams


@dataclass
class RunManifest:
    data_path: Path
    schema: list[ColumnSchema]
    criterion: str  # gsp | geo
    lambda_grid: list[float]
    out_dir: Path
    run_id: str
    config: dict


def load_schema(path) -> list[ColumnSchema]:
    with open(path, "r", encoding="utf-8") as f:
        entries = json.load(f)
    schema = []
    for e in entries:
        cats = tuple(e["categories"]) if e.get("categories") else None
        schema.append(ColumnSchema(e["name"], e["role"], e["kind"], cats))
    return schema


def _read_config(path) -> dict:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    out = {}
    for section in ("data", "model", "train", "output"):
        if parser.has_section(section):
            out.update({f"{section}.{k}": v for k, v in parser.items(section)})
    return out


def _train_config(cfg: dict, lam: float, overrides: argparse.Namespace, task: str) -> TrainConfig:
    def get(key, default, cast):
        return cast(cfg.get(f"train.{key}", default))

    return TrainConfig(
        lam=lam,
        T=get("t", 1000, int),
        learning_rate=get("learning_rate", 0.005, float),
        T_prime=get("t_prime", 1, int),
        L=get("l", 1000, int),
        n_b=get("n_b", 100, int),
        eval_interval=get("eval_interval", 100, int),
        seed=overrides.seed if overrides.seed is not None else get("seed", 0, int),
        sampler=overrides.sampler or get("sampler", "within_batch", str),
        task=task,
        scaling=overrides.scaling or get("scaling", "convex", str),
    )


def default_networks(p: int, l: int, criterion: str, task: str, rng: np.random.Generator):
    """Architectures used throughout: classification uses width-64 blocks,
    regression width-16; the scorer has 3 hidden blocks, discriminators 2."""
    width = 64 if task == "binary_classification" else 16
    out_act = "sigmoid" if task == "binary_classification" else "identity"
    h = mlp(p, [width] * 3, rng=rng, batch_norm=True, output_activation=out_act)
    d_in = 1 + l if criterion == "gsp" else 1 + l + 1
    d_net = mlp(d_in, [width] * 2, rng=rng, batch_norm=True)
    return h, d_net


def cmd_train(args) -> int:
    cfg = _read_config(args.config) if args.config else {}
    data_path = Path(args.data or cfg.get("data.csv", ""))
    schema_path = args.schema or cfg.get("data.schema")
    if not data_path.name or not schema_path:
        raise ConfigError("train requires --data and --schema (or a [data] config section)")
    schema = load_schema(schema_path)
    lambdas = [float(v) for v in (args.lam or str(cfg.get("train.lambda", "0.5")).split())]
    for lam in lambdas:
        if not 0.0 <= lam <= 1.0:
            raise ConfigError(f"lambda {lam} outside [0, 1]")
    out_dir = Path(args.out or cfg.get("output.dir", "runs"))
    run_id = args.run_id or cfg.get("output.run_id", "run")
    manifest = RunManifest(data_path, schema, args.criterion, lambdas, out_dir, run_id, cfg)

    dataset = load_csv(manifest.data_path, manifest.schema)
    task = (
        "regression"
        if dataset.outcome_column.kind == "continuous"
        else "binary_classification"
    )
    run_root = manifest.out_dir / manifest.run_id
    if run_root.exists() and not args.force:
        raise ConfigError(f"run directory {run_root} exists (use --force to overwrite)")

    for lam in manifest.lambda_grid:
        config = _train_config(cfg, lam, args, task)
        lam_dir = run_root / f"lambda={lam:g}"
        lam_dir.mkdir(parents=True, exist_ok=True)
        train_set, val_set = split_train_val(dataset, fraction=0.8, seed=config.seed)
        init_rng = rng_streams(config.seed)["init"]
        h, d_net = default_networks(train_set.p, train_set.l, manifest.criterion, task, init_rng)
        if manifest.criterion == "gsp":
            result = training.train_gsp(
                train_set, val_set, h, penalties.GspDiscriminator(d_net), config
            )
        else:
            result = training.train_geo(
                train_set, val_set, h, penalties.GeoDiscriminator(d_net), config
            )
            _maybe_write_beta_table(result.beta, train_set, lam_dir / "beta_table.csv")
        attr_names = [c.name for c in dataset.sensitive_columns]
        training.write_snapshot_csv(result.snapshots, attr_names, lam_dir / "snapshots.csv")
        result.h.save(lam_dir / "h_final.ckpt")
        result.discriminator.save(lam_dir / "d_final.ckpt")
        print(f"wrote {lam_dir}/snapshots.csv ({len(result.snapshots)} snapshots)")
    return 0


def _maybe_write_beta_table(beta, dataset, path) -> None:
    if any(c.kind == "continuous" for c in dataset.sensitive_columns):
        return
    if dataset.outcome_column.kind == "continuous":
        return
    cells = sorted({tuple(row) + (yv,) for row, yv in zip(dataset.A, dataset.Y)})
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([f"a{i}" for i in range(dataset.l)] + ["y", "ratio"])
        for cell in cells:
            a_row = np.array(cell[:-1]).reshape(1, -1)
            ratio = float(beta.values(a_row, np.array([cell[-1]]))[0])
            writer.writerow([repr(v) for v in cell] + [repr(ratio)])


def cmd_evaluate(args) -> int:
    schema = load_schema(args.schema)
    dataset = load_csv(args.data, schema)
    h = Mlp.load(args.checkpoint)
    if h.in_dim != dataset.p:
        raise ConfigError(
            f"checkpoint expects {h.in_dim} features but dataset has {dataset.p}"
        )
    task = (
        "regression"
        if dataset.outcome_column.kind == "continuous"
        else "binary_classification"
    )
    report = training.evaluate_snapshot(h, dataset, task)
    attr_names = [c.name for c in dataset.sensitive_columns]
    snap = training.Snapshot(0, "evaluate", report, Path(args.checkpoint).name)
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        csv.writer(f).writerows(training.snapshot_csv_rows([snap], attr_names))
    print(f"wrote {args.out}")
    return 0


def cmd_pareto(args) -> int:
    rows = []
    header_cols = None
    for path in args.snapshots:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            cols = tuple(reader.fieldnames or ())
            if header_cols is None:
                header_cols = cols
            elif cols != header_cols:
                extra = sorted(set(cols).symmetric_difference(header_cols))
                raise ConfigError(f"{path}: snapshot schema mismatch on columns {extra}")
            for rec in reader:
                rows.append((Path(path).stem, rec))
    if args.fairness_column not in (header_cols or ()):
        raise ConfigError(f"fairness column {args.fairness_column!r} not in inputs")

    points, meta = [], []
    for run_id, rec in rows:
        fval = rec.get(args.fairness_column, "")
        if fval in ("", "nan"):
            continue
        utility = float(rec["utility_value"])
        signed = -utility if rec["utility_name"] == "mae" else utility
        points.append((signed, float(fval)))
        meta.append((run_id, rec["iteration"], utility, float(fval)))
    flags = metrics.frontier_flags(points)
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["run_id", "iteration", "utility", "fairness_metric_name", "fairness_value", "on_frontier"]
        )
        for (run_id, it, utility, fval), flag in zip(meta, flags):
            writer.writerow(
                [run_id, it, repr(utility), args.fairness_column, repr(fval), int(flag)]
            )
    print(f"wrote {args.out}")
    if args.utility_threshold is not None:
        frontier = metrics.pareto_frontier(points)
        threshold = args.utility_threshold
        if rows and rows[0][1]["utility_name"] == "mae":
            threshold = -threshold
        summary = metrics.topk_fair_summary(frontier, threshold, k=args.k)
        print(
            f"top-{args.k} fairness: mean={summary.mean!r} std={summary.std!r} "
            f"count={summary.count}"
        )
    return 0


def cmd_ratio_toy(args) -> int:
    dataset = oracles.table5_toy(args.n, seed=args.seed)
    estimator = penalties.pretrain_density_ratio(
        dataset, L=args.iters, n_b=args.batch, seed=args.seed
    )
    true = oracles.table5_true_ratios()
    cells = [(1, 1), (0, 1), (1, 0), (0, 0)]  # matches the published ordering
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["cell", "true_ratio", "estimated_ratio", "abs_error"])
        for a, y in cells:
            est = float(estimator.values(np.array([[a]]), np.array([y]))[0])
            writer.writerow(
                [f"p({y}|{a})/p({y})", repr(true[(a, y)]), repr(est), repr(abs(est - true[(a, y)]))]
            )
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairpen")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the adversarial trainer over a lambda grid")
    p_train.add_argument("--config")
    p_train.add_argument("--data")
    p_train.add_argument("--schema")
    p_train.add_argument("--out")
    p_train.add_argument("--run-id")
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--lambda", dest="lam", action="append")
    p_train.add_argument("--criterion", choices=("gsp", "geo"), default="gsp")
    p_train.add_argument("--sampler", choices=("within_batch", "disjoint"))
    p_train.add_argument("--scaling", choices=("convex", "plain"))
    p_train.add_argument("--force", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--schema", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_evaluate)

    p_pareto = sub.add_parser("pareto", help="pool snapshot CSVs and flag the frontier")
    p_pareto.add_argument("snapshots", nargs="+")
    p_pareto.add_argument("--fairness-column", required=True)
    p_pareto.add_argument("--out", required=True)
    p_pareto.add_argument("--utility-threshold", type=float)
    p_pareto.add_argument("--k", type=int, default=5)
    p_pareto.set_defaults(func=cmd_pareto)

    p_toy = sub.add_parser("ratio-toy", help="reproduce the density-ratio toy experiment")
    p_toy.add_argument("--n", type=int, default=10000)
    p_toy.add_argument("--iters", type=int, default=10000)
    p_toy.add_argument("--batch", type=int, default=100)
    p_toy.add_argument("--seed", type=int, default=0)
    p_toy.add_argument("--out", required=True)
    p_toy.set_defaults(func=cmd_ratio_toy)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FairpenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
