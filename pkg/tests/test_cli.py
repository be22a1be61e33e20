import csv
import json

import numpy as np
import pytest

from kfhe.cli import main
from kfhe.dataset import bundled_path
from kfhe.models import load_model

IRIS = str(bundled_path("iris"))


def read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_train_then_predict_replays_training_estimate(tmp_path):
    model_path = tmp_path / "m.json"
    assert main(["train", IRIS, "--variant", "l", "--iterations", "30", "--out", str(model_path)]) == 0
    trace = read(tmp_path / "m.json.trace.csv")
    assert trace[0] == ["t", "R_y", "P_y", "K_y", "train_error"]
    assert all(0.0 <= float(row[3]) <= 1.0 for row in trace[1:])

    assert main(["predict", str(model_path), IRIS, "--out", str(tmp_path / "p.csv")]) == 0
    rows = read(tmp_path / "p.csv")
    assert rows[0] == ["row_index", "score_Iris-setosa", "score_Iris-versicolor",
                       "score_Iris-virginica", "predicted"]
    scores = np.array([[float(v) for v in r[1:4]] for r in rows[1:]])
    assert np.allclose(scores.sum(1), 1, atol=1e-9)

    # retraining with the same settings gives the stored final estimate
    from kfhe import TrainConfig, kfhe_train, load_bundled
    model = kfhe_train(load_bundled("iris"), TrainConfig(iterations=30), "l")
    assert np.max(np.abs(scores - model.final_estimate)) <= 1e-9


@pytest.mark.parametrize("algorithm", ["adaboost", "bagging", "cart", "kfhe-e"])
def test_train_each_algorithm(tmp_path, algorithm):
    out = tmp_path / "m.json"
    assert main(["train", "iris", "--algorithm", algorithm, "-T", "5", "--out", str(out)]) == 0
    model, header = load_model(out)
    assert header["algorithm"] == algorithm


def test_invalid_algorithm_is_a_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", IRIS, "--algorithm", "svm", "--out", str(tmp_path / "m.json")])
    assert exc.value.code == 2
    assert "invalid algorithm" in capsys.readouterr().err


def test_predict_empty_and_mismatched_files(tmp_path, capsys):
    model_path = tmp_path / "m.json"
    main(["train", IRIS, "-T", "3", "--out", str(model_path)])
    header = open(IRIS).readline()
    (tmp_path / "empty.csv").write_text(header)
    assert main(["predict", str(model_path), str(tmp_path / "empty.csv"),
                 "--out", str(tmp_path / "p.csv")]) == 0
    assert len(read(tmp_path / "p.csv")) == 1
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    assert main(["predict", str(model_path), str(tmp_path / "bad.csv")]) == 2
    assert "expected 4 feature columns" in capsys.readouterr().err


def test_benchmark_with_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"datasets": ["iris"], "algorithms": ["cart"], "repeats": 3,
                               "noise": [0.0, 0.1]}))
    out = tmp_path / "out"
    assert main(["benchmark", "--config", str(cfg), "--repeats", "1", "--out", str(out)]) == 0
    rows = read(out / "results.csv")
    assert len(rows) == 1 + 2 * 4  # flag beat the file's repeats=3


def test_noise_sweep_and_trace(tmp_path):
    out = tmp_path / "sweep"
    assert main(["noise-sweep", "--datasets", "iris", "--algorithms", "cart", "--repeats", "1",
                 "--out", str(out)]) == 0
    rows = read(out / "sweep.csv")
    assert rows[0] == ["dataset", "algorithm", "noise", "mean_f1", "sd_f1"]
    assert [r[2] for r in rows[1:]] == ["0.0", "0.05", "0.1", "0.15", "0.2"]

    assert main(["trace", "iris", "--variant", "l", "-T", "10", "--out", str(tmp_path)]) == 0
    assert read(tmp_path / "trace_iris-l.csv")[0][0] == "t"


def test_missing_training_file(tmp_path, capsys):
    assert main(["train", str(tmp_path / "none.csv"), "--out", str(tmp_path / "m.json")]) == 2
    assert "no such file" in capsys.readouterr().err
