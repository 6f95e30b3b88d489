import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from click.testing import CliRunner

from tnad import toy_two_clusters
from tnad.cli import cli


def write_csv(path, data, labels=None):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        header = [f"f{i}" for i in range(data.shape[1])]
        if labels is not None:
            header.append("class")
        writer.writerow(header)
        for i, row in enumerate(data):
            out = [f"{v:.8f}" for v in row]
            if labels is not None:
                out.append(str(int(labels[i])))
            writer.writerow(out)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    rng = np.random.default_rng(0)
    train = toy_two_clusters(300, 4, seed=1)
    write_csv(root / "train.csv", train)

    probe = np.vstack([toy_two_clusters(30, 4, seed=2), rng.uniform(-0.3, 1.3, (10, 4))])
    probe_labels = np.concatenate([np.zeros(30, bool), np.ones(10, bool)])
    write_csv(root / "probe.csv", probe, probe_labels)

    config = {
        "phys_dim": 3,
        "init_bond": 2,
        "train": {"learning_rate": 1e-2, "sweeps": 4, "batch_size": None, "max_bond": 4},
    }
    (root / "config.json").write_text(json.dumps(config))

    runner = CliRunner()
    result = runner.invoke(cli, [
        "train", "--data", str(root / "train.csv"), "--model", "mps",
        "--config", str(root / "config.json"), "--seed", "3",
        "--out", str(root / "model.tnad"),
    ])
    assert result.exit_code == 0, result.output
    return root


class TestTrain:
    def test_artifacts_written(self, workspace):
        assert (workspace / "model.tnad").exists()
        report = json.loads((workspace / "model.tnad.report.json").read_text())
        assert len(report["nll_trace"]) == 4


class TestScore:
    def test_scores_csv_schema(self, workspace):
        runner = CliRunner()
        out = workspace / "scores.csv"
        result = runner.invoke(cli, [
            "score", "--model-file", str(workspace / "model.tnad"),
            "--data", str(workspace / "probe.csv"),
            "--label-column", "class", "--anomaly-label", "1",
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        with open(out) as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["sample_id", "nll", "label"]
        assert len(rows) == 41
        scores = np.array([float(r[1]) for r in rows[1:]])
        labels = np.array([r[2] == "1" for r in rows[1:]])
        assert scores[labels].mean() > scores[~labels].mean()

    def test_without_labels(self, workspace):
        runner = CliRunner()
        out = workspace / "scores_nolabel.csv"
        result = runner.invoke(cli, [
            "score", "--model-file", str(workspace / "model.tnad"),
            "--data", str(workspace / "train.csv"), "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        with open(out) as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["sample_id", "nll"]


class TestExplain:
    def test_explanation_json_schema(self, workspace):
        runner = CliRunner()
        out = workspace / "explanation.json"
        result = runner.invoke(cli, [
            "explain", "--model-file", str(workspace / "model.tnad"),
            "--data", str(workspace / "probe.csv"), "--label-column", "class",
            "--sample", "35", "--k-sigma", "1.0", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        payload = json.loads(out.read_text())
        assert payload["sample_id"] == 35
        assert payload["threshold"] == 1.0
        assert isinstance(payload["nll"], float)
        assert len(payload["features"]) == 4
        for entry in payload["features"]:
            assert set(entry) == {
                "index", "observed", "mean", "std", "flagged", "conditional_expected"
            }

    def test_out_of_range_sample(self, workspace):
        runner = CliRunner()
        result = runner.invoke(cli, [
            "explain", "--model-file", str(workspace / "model.tnad"),
            "--data", str(workspace / "train.csv"), "--sample", "9999",
            "--out", str(workspace / "x.json"),
        ])
        assert result.exit_code != 0


class TestMi:
    def test_model_side_matrix(self, workspace):
        runner = CliRunner()
        out = workspace / "mi_model.csv"
        result = runner.invoke(cli, [
            "mi", "--from", "model", "--model-file", str(workspace / "model.tnad"),
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        matrix = np.loadtxt(out, delimiter=",")
        assert matrix.shape == (4, 4)
        np.testing.assert_allclose(matrix, matrix.T, atol=1e-12)

    def test_data_side_matrix_display(self, workspace):
        runner = CliRunner()
        out = workspace / "mi_data.csv"
        result = runner.invoke(cli, [
            "mi", "--from", "data", "--data", str(workspace / "probe.csv"),
            "--label-column", "class", "--display", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        matrix = np.loadtxt(out, delimiter=",")
        assert matrix.shape == (4, 4)
        assert matrix.max() <= 1.0 + 1e-12

    def test_missing_source_argument(self, workspace):
        runner = CliRunner()
        result = runner.invoke(cli, ["mi", "--from", "model", "--out", "x.csv"])
        assert result.exit_code != 0


class TestBenchmarkCommand:
    def test_end_to_end(self, workspace, tmp_path):
        rng = np.random.default_rng(5)
        regular = toy_two_clusters(400, 3, seed=7)
        native = rng.uniform(-0.5, 1.5, size=(60, 3))
        data = np.vstack([regular, native])
        labels = np.concatenate([np.zeros(400, bool), np.ones(60, bool)])
        write_csv(tmp_path / "bench.csv", data, labels)
        config = {
            "phys_dim": 3, "init_bond": 2, "n_folds": 3,
            "train": {"learning_rate": 5e-3, "sweeps": 1, "batch_size": None, "max_bond": 4},
        }
        (tmp_path / "config.json").write_text(json.dumps(config))
        runner = CliRunner()
        result = runner.invoke(cli, [
            "benchmark", "--data", str(tmp_path / "bench.csv"),
            "--label-column", "class", "--anomaly-label", "1",
            "--model", "mps", "--config", str(tmp_path / "config.json"),
            "--seed", "1", "--max-folds", "1", "--out", str(tmp_path / "bench_out"),
        ])
        assert result.exit_code == 0, result.output
        payload = json.loads((tmp_path / "bench_out" / "benchmark_mps.json").read_text())
        assert len(payload["separation_auc"]) == 1
        assert payload["model_paths"]


class TestExitCodes:
    def test_data_error_exits_two(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,oops\n")
        proc = subprocess.run(
            [sys.executable, "-m", "tnad.cli", "score",
             "--model-file", str(bad), "--data", str(bad), "--out", str(tmp_path / "o.csv")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2

    def test_success_exits_zero(self, workspace):
        proc = subprocess.run(
            [sys.executable, "-m", "tnad.cli", "score",
             "--model-file", str(workspace / "model.tnad"),
             "--data", str(workspace / "train.csv"),
             "--out", str(workspace / "exit0.csv")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
