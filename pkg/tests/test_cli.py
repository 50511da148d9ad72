import json
import subprocess
import sys

import numpy as np
import pytest

from wtrak import FeatureMatrix, LabeledDataset, save_dataset, save_features
from wtrak.cli import main
from wtrak.convex import ConvexLossSpec, fit_convex, wrif_interval


def read(path):
    return json.loads(path.read_text())


@pytest.fixture(scope="module")
def spectrum_files(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--kind", "spectrum", "--n", "400", "--d", "20", "--kappa", "1e4",
                 "--n-test", "20", "--out", str(out)]) == 0
    return out


def test_synth_two_cluster(tmp_path):
    assert main(["synth", "--kind", "two_cluster", "--n", "2000", "--d", "2", "--corruption-rate", "0.1",
                 "--out", str(tmp_path)]) == 0
    doc = read(tmp_path / "synth.json")
    assert len(doc["flipped"]) == 200 and doc["spec"]["seed"] == 0
    assert (tmp_path / "train.csv").read_text().startswith("id,x0,x1,y,flipped\n")


def test_synth_csv_format(tmp_path):
    assert main(["synth", "--n", "5", "--d", "3", "--format", "csv", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "train.csv").read_text().startswith("id,f0,f1,f2\n")


def test_spectrum_identity_and_kappa(tmp_path, spectrum_files):
    save_features(tmp_path / "eye.bin", FeatureMatrix(np.sqrt(2) * np.vstack([np.eye(3), -np.eye(3)])))
    assert main(["spectrum", str(tmp_path / "eye.bin"), "--lambda", "0", "--out", str(tmp_path)]) == 0
    doc = read(tmp_path / "spectrum.json")
    assert doc["report"]["condition_number"] == pytest.approx(1.0)
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "k,eigenvalue,euclidean_amplification,natural_amplification" and len(lines) == 4
    assert main(["spectrum", str(spectrum_files / "train.bin"), "--out", str(tmp_path)]) == 0
    amp = max(read(tmp_path / "spectrum.json")["report"]["euclidean_amplification"])
    assert 3.3e3 <= amp <= 3e4
    assert read(tmp_path / "spectrum.json")["config"]["lambda"] == 1e-4


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["spectrum", str(tmp_path / "nope.bin")]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_spec_exit_code(tmp_path):
    assert main(["anomaly", "--corruption-rate", "0.6", "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit_code(tmp_path):
    save_features(tmp_path / "rank1.bin", FeatureMatrix(np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])))
    assert main(["spectrum", str(tmp_path / "rank1.bin"), "--lambda", "0", "--out", str(tmp_path)]) == 3


def test_trak_outputs(tmp_path, spectrum_files):
    assert main(["trak", str(spectrum_files / "train.bin"), str(spectrum_files / "test.bin"),
                 "--epsilon", "0.01", "--out", str(tmp_path)]) == 0
    doc = read(tmp_path / "trak.json")
    assert doc["shape"] == [20, 400] and set(doc["lipschitz"]) == {"natural", "euclidean"}
    assert len((tmp_path / "trak.csv").read_text().splitlines()) == 1 + 20 * 400


def test_certify_zero_grid_and_single_series(tmp_path, spectrum_files):
    args = [str(spectrum_files / "train.bin"), str(spectrum_files / "test.bin"), "--grid", "0"]
    assert main(["certify", *args, "--out", str(tmp_path / "both")]) == 0
    doc = read(tmp_path / "both" / "frontier.json")
    assert [s["fractions"] for s in doc["series"]] == [[1.0], [1.0]]
    assert main(["certify", *args, "--metric", "natural", "--out", str(tmp_path / "nat")]) == 0
    doc = read(tmp_path / "nat" / "frontier.json")
    assert [s["metric"] for s in doc["series"]] == ["natural"]
    assert not (tmp_path / "nat" / "comparison.json").exists()


def test_certify_dominance(tmp_path, spectrum_files):
    assert main(["certify", str(spectrum_files / "train.bin"), str(spectrum_files / "test.bin"),
                 "--out", str(tmp_path)]) == 0
    series = {s["metric"]: s["fractions"] for s in read(tmp_path / "frontier.json")["series"]}
    assert all(n >= e for n, e in zip(series["natural"], series["euclidean"]))
    assert read(tmp_path / "comparison.json")["reduction_ratio"] > 1
    assert (tmp_path / "frontier.csv").read_text().startswith("epsilon,natural_frac,euclidean_frac\n")


def test_wrif_ridge_matches_library(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((12, 2))
    y = X @ [1.0, -1.0] + 0.1 * rng.standard_normal(12)
    save_dataset(tmp_path / "d.csv", LabeledDataset(X, y))
    assert main(["wrif", str(tmp_path / "d.csv"), "--loss", "ridge", "--reg-strength", "0.5",
                 "--epsilon", "0.1", "--n-test", "2", "--out", str(tmp_path)]) == 0
    doc = read(tmp_path / "wrif.json")
    fit = fit_convex(X, y, ConvexLossSpec("ridge", 0.5))
    entry = doc["intervals"][1 * 12 + 5]
    ref = wrif_interval(fit, 5, (X[1], y[1]), 0.1)
    assert entry["lo"] == pytest.approx(ref.lo, rel=1e-10) and entry["hi"] == pytest.approx(ref.hi, rel=1e-10)
    assert main(["wrif", str(tmp_path / "d.csv"), "--loss", "ridge", "--epsilon", "0",
                 "--out", str(tmp_path)]) == 0
    assert all(e["lo"] == e["hi"] for e in read(tmp_path / "wrif.json")["intervals"])


def test_wrif_loo_check(tmp_path):
    assert main(["synth", "--kind", "two_cluster", "--n", "100", "--d", "2", "--separation", "2",
                 "--seed", "7", "--out", str(tmp_path)]) == 0
    assert main(["wrif", str(tmp_path / "train.csv"), "--reg-strength", "0.1", "--loo-check",
                 "--out", str(tmp_path)]) == 0
    doc = read(tmp_path / "wrif.json")
    assert doc["coverage"]["coverage"] >= 0.9
    assert doc["config"]["epsilon_source"] == "diam/n"


def test_anomaly_outputs(tmp_path):
    assert main(["anomaly", "--out", str(tmp_path)]) == 0
    doc = read(tmp_path / "anomaly.json")
    assert doc["auroc"] >= 0.9 and doc["config"]["lambda"] == 1e-4
    assert (tmp_path / "roc.csv").read_text().startswith("fpr,tpr,threshold\n")
    assert (tmp_path / "pr.csv").read_text().startswith("recall,precision\n")


def test_console_script_and_thread_env(tmp_path):
    env = {"WTRAK_THREADS": "3", "PATH": "/usr/bin:/bin"}
    proc = subprocess.run([sys.executable, "-m", "wtrak.cli", "anomaly", "--n", "300", "--out", str(tmp_path)],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert read(tmp_path / "anomaly.json")["config"]["threads"] == 3
