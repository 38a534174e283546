"""Command-line front door: single runs, benchmark tables over dataset
directories, single-parameter sweeps, and the HTTP service.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import statistics
import sys
from dataclasses import dataclass, fields

import numpy as np

from .data import SyntheticSpec, load_csv, make_synthetic, split_and_normalize
from .errors import ImboostError, UndefinedMetricError
from .losses import LossConfig
from .metrics import auc, average_precision
from .query import SimulatedOracle
from .trainer import TrainerConfig, TrainingSession, run_session

SYNTHETIC_PRESETS = {
    "default": SyntheticSpec(),
    "ambiguous": SyntheticSpec(overlap=0.5),
    "hard": SyntheticSpec(overlap=0.85),
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Every tunable, with the practical defaults. Serialized alongside all
    outputs for provenance."""

    # data
    data: str | None = None
    label_column: str | None = None
    synthetic: str | None = None
    synthetic_n: int = 2000
    synthetic_p_o: float = 0.05
    synthetic_overlap: float | None = None
    test_fraction: float = 0.3
    oracle: str = "simulated"          # simulated | none
    # schedule
    n0: int = 128
    gamma: float = 1.03
    T0: int = 10
    T1: int = 40
    T2: int = 50
    Ta: int = 5
    lr: float = 1e-3
    seed: int = 0
    score_mc: int = 16
    strategy: str = "mm"
    alpha: float = 0.4
    budget_mode: str = "per-round"
    budget_override: int | None = None
    # objective
    iwae_samples: int = 2
    cubo_power: int = 2
    lambda1: float = 2.0
    lambda2: float = 1.0
    lambda_decay_gamma: float | None = 1.05
    rho: float = 0.92
    xi: float = 0.4

    def trainer_config(self) -> TrainerConfig:
        override = self.budget_override
        if self.oracle == "none":
            override = 0
        return TrainerConfig(n0=self.n0, gamma=self.gamma, T0=self.T0, T1=self.T1,
                             T2=self.T2, Ta=self.Ta, lr=self.lr, seed=self.seed,
                             score_mc=self.score_mc, strategy=self.strategy,
                             alpha=self.alpha, budget_mode=self.budget_mode,
                             budget_override=override)

    def loss_config(self) -> LossConfig:
        return LossConfig(iwae_samples=self.iwae_samples, cubo_power=self.cubo_power,
                          lambda1=self.lambda1, lambda2=self.lambda2,
                          lambda_decay_gamma=self.lambda_decay_gamma,
                          rho=self.rho, xi=self.xi)

    def synthetic_spec(self) -> SyntheticSpec:
        base = SYNTHETIC_PRESETS.get(self.synthetic)
        if base is None:
            raise UsageError(f"unknown synthetic preset {self.synthetic!r}; "
                             f"choose from {sorted(SYNTHETIC_PRESETS)}")
        overlap = self.synthetic_overlap if self.synthetic_overlap is not None else base.overlap
        return dataclasses.replace(base, n=self.synthetic_n, p_o=self.synthetic_p_o,
                                   overlap=overlap, seed=self.seed)


def _flag_name(field_name: str) -> str:
    return "--" + field_name.replace("_", "-").lower()


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One kebab-case flag per RunConfig field; None default so that a config
    file can fill unset values and explicit flags win."""
    for f in fields(RunConfig):
        kind = {int: int, float: float}.get(f.type if isinstance(f.type, type) else str, None)
        if f.name in ("n0", "T0", "T1", "T2", "Ta", "seed", "score_mc",
                      "synthetic_n", "budget_override", "iwae_samples", "cubo_power"):
            kind = int
        elif f.name in ("gamma", "lr", "alpha", "lambda1", "lambda2", "rho", "xi",
                        "lambda_decay_gamma", "synthetic_p_o", "synthetic_overlap",
                        "test_fraction"):
            kind = float
        else:
            kind = str
        parser.add_argument(_flag_name(f.name), dest=f.name, type=kind, default=None)
    parser.add_argument("--config", dest="config_file", default=None,
                        help="JSON file of config values; flags override it")


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config_file", None):
        with open(args.config_file, encoding="utf-8") as fh:
            loaded = json.load(fh)
        known = {f.name for f in fields(RunConfig)}
        for key, val in loaded.items():
            name = key.replace("-", "_")
            if name not in known:
                raise UsageError(f"unknown config key {key!r}")
            values[name] = val
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    try:
        return RunConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))


def load_dataset(config: RunConfig):
    if (config.data is None) == (config.synthetic is None):
        raise UsageError("provide exactly one of --data and --synthetic")
    if config.data is not None:
        ds = load_csv(config.data, label_column=config.label_column)
    else:
        ds = make_synthetic(config.synthetic_spec())
    if config.oracle == "simulated" and ds.labels is None:
        raise UsageError("the simulated oracle needs a label column")
    if config.oracle not in ("simulated", "none"):
        raise UsageError("oracle must be 'simulated' or 'none' "
                         "(use the serve command for a human oracle)")
    return split_and_normalize(ds, test_fraction=config.test_fraction, seed=config.seed)


def execute_run(config: RunConfig) -> tuple[TrainingSession, dict]:
    dataset = load_dataset(config)
    oracle = (SimulatedOracle(dataset.train_labels())
              if config.oracle == "simulated" else None)
    session = run_session(dataset, config.trainer_config(), config.loss_config(),
                          oracle=oracle)
    metrics = {"config": dataclasses.asdict(config), "seed": config.seed,
               "strategy": config.strategy,
               "auc_train": None, "auc_test": None,
               "ap_train": None, "ap_test": None, "per_round": []}
    if dataset.labels is not None:
        try:
            metrics["auc_train"] = auc(session.train_scores(), dataset.train_labels())
            metrics["ap_train"] = average_precision(session.train_scores(),
                                                    dataset.train_labels())
            metrics["auc_test"] = auc(session.test_scores(), dataset.test_labels())
            metrics["ap_test"] = average_precision(session.test_scores(),
                                                   dataset.test_labels())
        except UndefinedMetricError:
            pass
        metrics["per_round"] = [{"round": r, "auc_test": a, "ap_test": p}
                                for r, a, p in session.per_round_metrics]
    return session, metrics


def write_scores_csv(path, session: TrainingSession) -> None:
    ds = session.dataset
    train_scores, test_scores = session.train_scores(), session.test_scores()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["row_index", "split", "score"]
        if ds.labels is not None:
            header.append("label")
        writer.writerow(header)
        for split, idx, scores in (("train", ds.train_idx, train_scores),
                                   ("test", ds.test_idx, test_scores)):
            for i, s in zip(idx, scores):
                row = [int(i), split, repr(float(s))]
                if ds.labels is not None:
                    row.append(int(ds.labels[i]))
                writer.writerow(row)


def cmd_run(args) -> int:
    config = resolve_config(args)
    session, metrics = execute_run(config)
    write_scores_csv(args.scores_out, session)
    with open(args.metrics_out, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2)
    summary = {k: metrics[k] for k in ("auc_test", "ap_test")}
    print(json.dumps(summary))
    return 0


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise UsageError(f"bad seed list {text!r}")


def cmd_bench(args) -> int:
    import pathlib

    config = resolve_config(args)
    seeds = _parse_seeds(args.seeds)
    paths = sorted(pathlib.Path(args.data_dir).glob("*.csv"))
    if not paths:
        raise UsageError(f"no CSV files under {args.data_dir}")

    rows = []
    for path in paths:
        finals = []
        for seed in seeds:
            cell = dataclasses.replace(config, data=str(path), synthetic=None,
                                       label_column=args.label_column, seed=seed)
            try:
                _, metrics = execute_run(cell)
            except (ImboostError, OSError, ValueError) as exc:
                print(f"warning: skipping {path.name} (seed {seed}): {exc}",
                      file=sys.stderr)
                rows.append([path.name, seed, "", "test", "error", "error"])
                continue
            for entry in metrics["per_round"]:
                rows.append([path.name, seed, entry["round"], "test",
                             entry["auc_test"], entry["ap_test"]])
            if metrics["per_round"]:
                last = metrics["per_round"][-1]
                finals.append((last["auc_test"], last["ap_test"]))
            else:
                finals.append((metrics["auc_test"], metrics["ap_test"]))
        if finals:
            aucs = [a for a, _ in finals]
            aps = [p for _, p in finals]
            rows.append([path.name, "mean", config.Ta, "test",
                         statistics.fmean(aucs), statistics.fmean(aps)])
            rows.append([path.name, "std", config.Ta, "test",
                         statistics.stdev(aucs) if len(aucs) > 1 else 0.0,
                         statistics.stdev(aps) if len(aps) > 1 else 0.0])

    with open(args.table_out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "seed", "round", "split", "auc", "ap"])
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.table_out}")
    return 0


SWEEPABLE = ("lambda1", "lambda2", "xi", "alpha", "T1", "rho", "strategy")


def cmd_sweep(args) -> int:
    config = resolve_config(args)
    if args.param not in SWEEPABLE:
        raise UsageError(f"sweepable parameters: {SWEEPABLE}")
    seeds = _parse_seeds(args.seeds)
    caster = str if args.param == "strategy" else (int if args.param == "T1" else float)
    try:
        grid = [caster(v) for v in args.values.split(",") if v.strip() != ""]
    except ValueError:
        raise UsageError(f"bad grid {args.values!r} for {args.param}")
    if not grid:
        raise UsageError("empty grid")

    rows = []
    for value in grid:
        for seed in seeds:
            cell = dataclasses.replace(config, seed=seed, **{args.param: value})
            _, metrics = execute_run(cell)
            rows.append([args.param, value, seed,
                         metrics["auc_test"], metrics["ap_test"]])

    with open(args.table_out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "value", "seed", "auc_test", "ap_test"])
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.table_out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imboost",
                                     description="Active outlier detection trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single training run")
    _add_config_flags(p_run)
    p_run.add_argument("--scores-out", default="scores.csv")
    p_run.add_argument("--metrics-out", default="metrics.json")
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("bench", help="per-dataset, per-round benchmark table")
    _add_config_flags(p_bench)
    p_bench.add_argument("--data-dir", required=True)
    p_bench.add_argument("--seeds", default="0,1,2")
    p_bench.add_argument("--table-out", default="bench.csv")
    p_bench.set_defaults(func=cmd_bench)

    p_sweep = sub.add_parser("sweep", help="one-parameter grid")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--param", required=True)
    p_sweep.add_argument("--values", required=True)
    p_sweep.add_argument("--seeds", default="0,1,2,3,4")
    p_sweep.add_argument("--table-out", default="sweep.csv")
    p_sweep.set_defaults(func=cmd_sweep)

    p_serve = sub.add_parser("serve", help="HTTP session service (human oracle)")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ImboostError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
