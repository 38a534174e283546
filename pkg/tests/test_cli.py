"""Command-line contract: artifacts, provenance, exit codes, bench and sweep
table shapes."""

import csv
import json
import statistics

import numpy as np
import pytest

from imboost import SyntheticSpec, make_synthetic
from imboost.cli import main

TINY = ["--synthetic-n", "240", "--n0", "16", "--t0", "2", "--t1", "6",
        "--t2", "10", "--ta", "2", "--score-mc", "4"]


def run_cli(args):
    return main([str(a) for a in args])


def write_tiny_csv(path, seed=0, n=160):
    ds = make_synthetic(SyntheticSpec(n=n, seed=seed))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["f0", "f1", "y"])
        for row, label in zip(ds.features, ds.labels):
            writer.writerow([repr(float(row[0])), repr(float(row[1])), int(label)])


@pytest.fixture
def outputs(tmp_path):
    return {"scores": tmp_path / "scores.csv", "metrics": tmp_path / "metrics.json"}


def run_args(outputs, extra=()):
    return (["run", "--synthetic", "default", *TINY,
             "--scores-out", outputs["scores"], "--metrics-out", outputs["metrics"]]
            + list(extra))


def test_run_smoke_writes_artifacts(outputs):
    assert run_cli(run_args(outputs, ["--seed", "1"])) == 0
    metrics = json.loads(outputs["metrics"].read_text())
    assert 0.0 <= metrics["auc_test"] <= 1.0
    assert metrics["seed"] == 1
    assert metrics["config"]["seed"] == 1  # resolved config embedded
    assert metrics["strategy"] == "mm"
    assert len(metrics["per_round"]) == 2

    with open(outputs["scores"], newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 240
    assert {r["split"] for r in rows} == {"train", "test"}
    assert all(r["label"] in ("0", "1") for r in rows)


def test_run_records_strategy(outputs):
    assert run_cli(run_args(outputs, ["--strategy", "cp"])) == 0
    assert json.loads(outputs["metrics"].read_text())["strategy"] == "cp"


def test_config_file_with_flag_override(tmp_path, outputs):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"synthetic": "default", "synthetic-n": 240,
                                  "n0": 16, "T0": 2, "T1": 6, "T2": 10, "Ta": 2,
                                  "score_mc": 4, "seed": 3, "strategy": "rd"}))
    args = ["run", "--config", config, "--strategy", "cp",
            "--scores-out", outputs["scores"], "--metrics-out", outputs["metrics"]]
    assert run_cli(args) == 0
    metrics = json.loads(outputs["metrics"].read_text())
    assert metrics["seed"] == 3            # from the config file
    assert metrics["strategy"] == "cp"     # flag wins


def test_usage_errors_exit_2(tmp_path, outputs):
    # neither data nor synthetic
    assert run_cli(run_args(outputs)[0:1] + TINY) == 2
    # both
    csv_path = tmp_path / "d.csv"
    write_tiny_csv(csv_path)
    assert run_cli(run_args(outputs, ["--data", csv_path])) == 2
    # simulated oracle without a label column
    assert run_cli(["run", "--data", str(csv_path), *TINY,
                    "--scores-out", str(outputs["scores"]),
                    "--metrics-out", str(outputs["metrics"])]) == 2
    # unknown preset
    assert run_cli(["run", "--synthetic", "mystery", *TINY]) == 2
    # unknown config key
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"learning-rate": 0.1}))
    assert run_cli(["run", "--config", bad, "--synthetic", "default"]) == 2


def test_runtime_failure_exits_1(outputs):
    assert run_cli(["run", "--data", "/does/not/exist.csv",
                    "--label-column", "y", *TINY]) == 1


def test_oracle_none_runs_unsupervised(outputs):
    assert run_cli(run_args(outputs, ["--oracle", "none"])) == 0
    metrics = json.loads(outputs["metrics"].read_text())
    # rounds still tick (with zero budget) so the metric curve is recorded
    assert len(metrics["per_round"]) == 2
    assert metrics["auc_test"] is not None


def test_bench_table_shape_and_aggregate(tmp_path):
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    write_tiny_csv(data_dir / "toy.csv")
    table = tmp_path / "bench.csv"
    args = ["bench", "--data-dir", data_dir, "--seeds", "0,1,2",
            "--label-column", "y", *TINY, "--table-out", table]
    assert run_cli(args) == 0

    with open(table, newline="") as fh:
        rows = list(csv.DictReader(fh))
    seed_rows = [r for r in rows if r["seed"] not in ("mean", "std")]
    assert len(seed_rows) == 3 * 2  # seeds x Ta rounds
    assert all(r["dataset"] == "toy.csv" and r["split"] == "test" for r in rows)

    finals = [float(r["auc"]) for r in seed_rows if r["round"] == "2"]
    mean_row = next(r for r in rows if r["seed"] == "mean")
    std_row = next(r for r in rows if r["seed"] == "std")
    assert float(mean_row["auc"]) == pytest.approx(statistics.fmean(finals))
    assert float(std_row["auc"]) == pytest.approx(statistics.stdev(finals))

    # deterministic: rerun writes the identical table
    second = tmp_path / "bench2.csv"
    run_cli(args[:-1] + [second])
    assert table.read_text() == second.read_text()


def test_bench_std_matches_hand_computed_three_value_case():
    values = [0.9, 0.8, 1.0]
    # sample standard deviation: mean 0.9, squared deviations 0.01, 0.01, 0
    assert statistics.stdev(values) == pytest.approx((0.02 / 2) ** 0.5)


def test_sweep_single_point_equals_run(tmp_path, outputs):
    table = tmp_path / "sweep.csv"
    assert run_cli(["sweep", "--synthetic", "default", *TINY, "--param", "lambda1",
                    "--values", "2", "--seeds", "0", "--table-out", table]) == 0
    with open(table, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1

    assert run_cli(run_args(outputs, ["--seed", "0"])) == 0
    metrics = json.loads(outputs["metrics"].read_text())
    assert float(rows[0]["auc_test"]) == pytest.approx(metrics["auc_test"], abs=0)


def test_sweep_grid_rows(tmp_path):
    table = tmp_path / "sweep.csv"
    assert run_cli(["sweep", "--synthetic", "default", *TINY, "--param", "xi",
                    "--values", "0.0,0.4", "--seeds", "0,1",
                    "--table-out", table]) == 0
    with open(table, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4  # 2 grid points x 2 seeds
    assert {r["param"] for r in rows} == {"xi"}


def test_sweep_rejects_unknown_parameter(tmp_path):
    assert run_cli(["sweep", "--synthetic", "default", *TINY, "--param", "n0",
                    "--values", "16", "--table-out", tmp_path / "t.csv"]) == 2
