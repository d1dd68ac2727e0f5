import json
from pathlib import Path

import numpy as np
import pytest

from dktgraph import influence, ingest
from dktgraph.cli import main

from helpers import parse_dot


def run(args):
    return main([str(a) for a in args])


def read_json_file(path):
    return json.loads(Path(path).read_text())


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    code = run(
        ["simulate", "--concepts", 6, "--students", 40, "--length", 20,
         "--edge-prob", 0.4, "--seed", 3, "--out", out, "--quiet"]
    )
    assert code == 0
    return out


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory, sim_dir):
    out = tmp_path_factory.mktemp("run")
    code = run(
        ["train", "--data", sim_dir, "--out", out, "--seed", 1, "--epochs", 2,
         "--hidden", 8, "--batch-size", 16, "--quiet"]
    )
    assert code == 0
    return out


class TestSimulate:
    def test_outputs_and_manifest(self, sim_dir):
        assert (sim_dir / "dataset.txt").exists()
        assert (sim_dir / "ground_truth.json").exists()
        manifest = read_json_file(sim_dir / "manifest.json")
        assert manifest["command"] == "simulate"
        assert manifest["seeds"] == {"seed": 3}
        assert manifest["config"]["num_concepts"] == 6
        d = ingest.read_canonical(sim_dir / "dataset.txt")
        assert d.num_exercises == 6 and len(d.sequences) == 40

    def test_rerun_is_byte_identical(self, sim_dir, tmp_path):
        out2 = tmp_path / "again"
        run(
            ["simulate", "--concepts", 6, "--students", 40, "--length", 20,
             "--edge-prob", 0.4, "--seed", 3, "--out", out2, "--quiet"]
        )
        assert (out2 / "dataset.txt").read_bytes() == (sim_dir / "dataset.txt").read_bytes()
        assert (out2 / "ground_truth.json").read_bytes() == (
            sim_dir / "ground_truth.json"
        ).read_bytes()


class TestIngest:
    def test_csv_to_canonical(self, tmp_path):
        csv = tmp_path / "log.csv"
        csv.write_text(
            "order_id,user_id,skill_id,correct,skill_name\n"
            "1,u1,17,1,Area\n2,u1,23,0,Perimeter\n3,u2,17,1,Area\n"
        )
        out = tmp_path / "data"
        assert run(["ingest", "--csv", csv, "--out", out, "--quiet"]) == 0
        summary = read_json_file(out / "parse_summary.json")
        assert summary["num_exercises"] == 2
        assert summary["students_dropped_short"] == 1
        d = ingest.read_canonical(out / "dataset.txt")
        assert d.exercise_names[0] == "Area"

    def test_missing_csv_fails_with_stage(self, tmp_path, capsys):
        code = run(["ingest", "--csv", tmp_path / "nope.csv", "--out", tmp_path / "x"])
        assert code == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["stage"] == "ingest"


class TestTrain:
    def test_outputs(self, trained_dir):
        assert (trained_dir / "model.npz").exists()
        report = read_json_file(trained_dir / "training_report.json")
        assert report["epochs_run"] == 2
        assert len(report["val_auc"]) == 2
        manifest = read_json_file(trained_dir / "manifest.json")
        assert manifest["command"] == "train"

    def test_missing_data_names_ingest_stage(self, tmp_path, capsys):
        code = run(["train", "--data", tmp_path / "missing", "--out", tmp_path / "o"])
        assert code == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["stage"] == "ingest"


class TestInfluence:
    def test_outputs(self, trained_dir, tmp_path):
        out = tmp_path / "inf"
        code = run(
            ["influence", "--model", trained_dir / "model.npz", "--out", out,
             "--method", "single", "--quiet"]
        )
        assert code == 0
        m = influence.read_json(out / "influence.json")
        assert m.method == "single"
        assert np.allclose(m.values.sum(axis=1), 1.0, atol=1e-9)
        csv_m = influence.read_csv(out / "influence.csv")
        assert np.allclose(csv_m.values, m.values, rtol=1e-15)


class TestGraph:
    def test_dot_and_json_and_tau_recorded(self, trained_dir, tmp_path):
        inf = tmp_path / "inf"
        run(["influence", "--model", trained_dir / "model.npz", "--out", inf,
             "--method", "single", "--quiet"])
        dot_path = tmp_path / "g.dot"
        code = run(["graph", "--influence", inf / "influence.csv", "--out", dot_path, "--quiet"])
        assert code == 0
        parse_dot(dot_path.read_text())
        graph_json = read_json_file(tmp_path / "g.json")
        assert graph_json["acyclic"] is True
        manifest = read_json_file(tmp_path / "g.dot.manifest.json")
        assert manifest["config"]["tau"] == graph_json["tau"]

    def test_acyclic_matrix_records_tau_zero(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("0,1\n0,0.9\n0,0\n")
        dot_path = tmp_path / "g.dot"
        assert run(["graph", "--influence", path, "--out", dot_path, "--quiet"]) == 0
        manifest = read_json_file(tmp_path / "g.dot.manifest.json")
        assert manifest["config"]["tau"] == 0.0


@pytest.fixture(scope="module")
def results(tmp_path_factory, sim_dir):
    out = tmp_path_factory.mktemp("results")
    code = run(
        ["experiment", "--data", sim_dir, "--out", out, "--seed", 7,
         "--epochs", 2, "--hidden", 8, "--batch-size", 16,
         "--method", "stabilized", "--window", 5, "--max-probes", 50,
         "--label", "synthetic", "--quiet"]
    )
    assert code == 0
    return out


class TestExperimentAndReport:
    def test_report_has_finite_z(self, results):
        report = read_json_file(results / "report.json")
        assert np.isfinite(report["z"])
        assert len(report["random_aucs"]) == 5

    def test_artifacts_written(self, results):
        for name in ("model.npz", "influence.csv", "dag.dot", "dag.json", "report.json"):
            assert (results / name).exists(), name
        parse_dot((results / "dag.dot").read_text())

    def test_report_command_renders_table(self, results, capsys):
        assert run(["report", "--report", results / "report.json", "--label", "synthetic"]) == 0
        out = capsys.readouterr().out
        assert "synthetic Causal" in out and "z-score" in out

    def test_rerun_reproduces_report_bytes(self, results, tmp_path_factory, sim_dir):
        out2 = tmp_path_factory.mktemp("results2")
        run(
            ["experiment", "--data", sim_dir, "--out", out2, "--seed", 7,
             "--epochs", 2, "--hidden", 8, "--batch-size", 16,
             "--method", "stabilized", "--window", 5, "--max-probes", 50,
             "--label", "synthetic", "--quiet"]
        )
        assert (out2 / "report.json").read_bytes() == (results / "report.json").read_bytes()


class TestConfigFile:
    def test_config_file_sets_defaults_flags_win(self, sim_dir, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# defaults\nepochs = 1\nhidden = 4\nseed = 9\n")
        out = tmp_path / "o"
        code = run(
            ["train", "--data", sim_dir, "--out", out, "--config", cfg,
             "--seed", 2, "--batch-size", 16, "--quiet"]
        )
        assert code == 0
        report = read_json_file(out / "training_report.json")
        assert report["epochs_run"] == 1  # from config
        assert report["seed"] == 2  # flag wins over config
        manifest = read_json_file(out / "manifest.json")
        assert manifest["config"]["hidden_size"] == 4

    def test_malformed_config_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("epochs 5\n")
        code = run(["train", "--data", tmp_path, "--out", tmp_path / "o", "--config", cfg])
        assert code == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert "key = value" in err["error"]
