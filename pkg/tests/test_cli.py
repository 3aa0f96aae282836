import csv
import subprocess
import sys

import numpy as np
import pytest

from pentobit.cli import main
from pentobit.modelfile import ModelFile


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


@pytest.fixture
def data_csv(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((60, 3))
    y = np.maximum(1.0 + x @ np.array([1.5, 0.0, -1.0]) + rng.standard_normal(60), 0.5)
    rows = [[f"{v:.6f}" for v in xi] + [f"{yi:.6f}"] for xi, yi in zip(x, y)]
    return write_csv(tmp_path / "d.csv", ["x1", "x2", "x3", "y"], rows)


def fit_args(path, out, *extra):
    return ["fit", path, "--response", "y", "--censor-value", "0.5", "-o", out, *extra]


def test_fit_then_predict(tmp_path, data_csv, capsys):
    model = str(tmp_path / "m.json")
    assert main(fit_args(data_csv, model, "--lambda", "0.05")) == 0
    out = capsys.readouterr().out
    assert "converged: True" in out and "support size:" in out
    saved = ModelFile.load(model)
    assert saved.column_names == ("x1", "x2", "x3") and saved.censor_shift == 0.5
    preds = str(tmp_path / "p.csv")
    assert main(["predict", model, data_csv, "-o", preds]) == 0
    with open(preds) as fh:
        values = [float(r["prediction"]) for r in csv.DictReader(fh)]
    assert len(values) == 60 and min(values) >= 0.5


def test_huge_lambda_gives_zero_slopes(tmp_path, data_csv):
    model = str(tmp_path / "m.json")
    assert main(fit_args(data_csv, model, "--lambda", "1e9", "--penalty", "lasso")) == 0
    assert np.all(ModelFile.load(model).natural.beta == 0)


def test_fit_by_cross_validation(tmp_path, data_csv):
    model = str(tmp_path / "m.json")
    args = fit_args(data_csv, model, "--cv", "--k", "3", "--n-lambda", "8", "--penalty", "mcp")
    assert main(args) == 0
    assert ModelFile.load(model).family == "mcp"


def test_missing_response_column(tmp_path, data_csv, capsys):
    code = main(["fit", data_csv, "--response", "z", "--lambda", "0.1",
                 "-o", str(tmp_path / "m.json")])
    assert code == 2 and "'z'" in capsys.readouterr().err


def test_non_numeric_cell_names_line_and_column(tmp_path, capsys):
    path = write_csv(tmp_path / "bad.csv", ["x", "y"], [["1", "2"], ["abc", "3"]])
    assert main(fit_args(path, str(tmp_path / "m.json"), "--lambda", "0.1")) == 2
    err = capsys.readouterr().err
    assert "line 3" in err and "'x'" in err


def test_excluded_text_column(tmp_path, capsys):
    rows = [[f"id{i}", str(i % 5 + 0.3 * i), str(i % 3 + 1.0)] for i in range(20)]
    path = write_csv(tmp_path / "ids.csv", ["id", "x", "y"], rows)
    args = ["fit", path, "--response", "y", "--exclude", "id", "--lambda", "0.01",
            "--penalty", "lasso", "-o", str(tmp_path / "m.json")]
    assert main(args) == 0


def test_ragged_row(tmp_path, capsys):
    path = write_csv(tmp_path / "r.csv", ["x", "y"], [["1", "2"], ["1"]])
    assert main(fit_args(path, str(tmp_path / "m.json"), "--lambda", "0.1")) == 2
    assert "line 3" in capsys.readouterr().err


def test_all_censored_is_a_data_error(tmp_path, capsys):
    path = write_csv(tmp_path / "c.csv", ["x", "y"], [[str(i), "0.5"] for i in range(5)])
    assert main(fit_args(path, str(tmp_path / "m.json"), "--lambda", "0.1")) == 3


def test_zero_variance_column_is_a_data_error(tmp_path, capsys):
    path = write_csv(tmp_path / "z.csv", ["x", "y"], [["1", str(i + 1.0)] for i in range(5)])
    assert main(fit_args(path, str(tmp_path / "m.json"), "--lambda", "0.1")) == 3


def test_nonconvergence_exit_code(tmp_path, data_csv, capsys):
    out = str(tmp_path / "m.json")
    args = fit_args(data_csv, out, "--lambda", "0.001", "--max-cycles", "1")
    assert main(args) == 4
    assert main(args + ["--allow-nonconverged"]) == 0


def test_predict_needs_model_columns(tmp_path, data_csv, capsys):
    model = str(tmp_path / "m.json")
    assert main(fit_args(data_csv, model, "--lambda", "0.05")) == 0
    other = write_csv(tmp_path / "o.csv", ["x1", "x2"], [["1", "2"]])
    assert main(["predict", model, other]) == 2
    assert "'x3'" in capsys.readouterr().err


def test_path_and_cv_outputs(tmp_path, data_csv, capsys):
    path_out, cv_out = str(tmp_path / "path.csv"), str(tmp_path / "cv.csv")
    common = [data_csv, "--response", "y", "--censor-value", "0.5", "--n-lambda", "6"]
    assert main(["path", *common, "-o", path_out]) == 0
    with open(path_out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6 and int(rows[0]["nonzero"]) == 0 and "x3" in rows[0]
    assert main(["cv", *common, "--k", "3", "-o", cv_out]) == 0
    assert "best lambda" in capsys.readouterr().err
    with open(cv_out) as fh:
        assert next(csv.reader(fh)) == ["lambda", "cv_mse"]


def test_simulate_is_reproducible(tmp_path, capsys):
    args = ["simulate", "--reps", "2", "--p", "8", "--n-test", "200", "--n-lambda", "6",
            "--k", "3", "--seed", "3", "--methods", "tobit_lasso,ols_oracle"]
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert main(args + ["-o", a]) == 0
    assert main(args + ["--threads", "2", "-o", b]) == 0
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()
    assert "tobit_lasso" in capsys.readouterr().out


def test_simulate_rejects_unknown_method(capsys):
    assert main(["simulate", "--reps", "1", "--methods", "ridge"]) == 2


def test_check_passes():
    proc = subprocess.run([sys.executable, "-m", "pentobit.cli", "check", "--quick"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "FAIL" not in proc.stdout
