import json

import numpy as np
import pandas as pd
import pytest

from gppi import Estimand, LabeledUnlabeledData, ShiftSample, fit_logistic_pi, ppi_no_shift
from gppi import ppi_shift, ppi_shift_estimated_pi
from gppi.cli import main

from conftest import write_fake_wine

TOY = pd.DataFrame({
    "r": [0.1, 0.4, 0.35, 0.8, 0.5, 0.9, 0.2, 0.6],
    "f": [0.2, 0.3, 0.6, 0.7, 0.4, 0.8, 0.1, 0.55],
    "y": [0, 0, 1, 1, np.nan, np.nan, np.nan, np.nan],
})


def write(tmp_path, df, name="data.csv"):
    path = tmp_path / name
    df.to_csv(path, index=False)
    return str(path)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def toy_data():
    lab = TOY["y"].notna().to_numpy()
    r, f, y = TOY["r"].to_numpy(), TOY["f"].to_numpy(), TOY["y"].to_numpy()
    return LabeledUnlabeledData(r[lab], f[lab], y[lab], r[~lab], f[~lab])


def test_estimate_json_matches_api_exactly(tmp_path, capsys):
    path = write(tmp_path, TOY)
    code, out, err = run(capsys, "estimate", path, "--metric", "mean", "--format", "json")
    assert code == 0
    assert "inferred" in err
    report = json.loads(out)
    res = ppi_no_shift(Estimand.mean(), toy_data())
    for key, value in res.to_dict().items():
        assert report[key] == value


def test_estimate_table_matches_api_to_printed_digits(tmp_path, capsys):
    path = write(tmp_path, TOY)
    code, out, _ = run(capsys, "estimate", path, "--metric", "mean")
    assert code == 0
    fields = dict(line.split(None, 1) for line in out.strip().splitlines())
    res = ppi_no_shift(Estimand.mean(), toy_data())
    for key in ("point", "se", "ci_low", "ci_high", "omega_hat", "baseline_se"):
        assert fields[key].strip() == f"{getattr(res, key):.6g}"


def test_estimate_only_n_mode(tmp_path, capsys):
    path = write(tmp_path, TOY)
    code, out, _ = run(capsys, "estimate", path, "--metric", "auc", "--rectifier", "only-n",
                       "--format", "json")
    assert code == 0
    res = ppi_no_shift(Estimand.auc(), toy_data(), mode="only-n")
    assert json.loads(out)["point"] == res.point


def test_no_unlabeled_rows(tmp_path, capsys):
    path = write(tmp_path, TOY.iloc[:4])
    code, _, err = run(capsys, "estimate", path, "--target", "none")
    assert code == 2
    assert "no unlabeled data" in err


def test_mse_with_f_equal_r(tmp_path, capsys):
    df = TOY.assign(f=TOY["r"])
    path = write(tmp_path, df)
    code, out, _ = run(capsys, "estimate", path, "--metric", "mse", "--format", "json")
    assert code == 0
    report = json.loads(out)
    assert report["point"] == report["baseline_point"]
    assert report["se"] == report["baseline_se"]


def test_degenerate_estimand_exit_code(tmp_path, capsys):
    df = TOY.assign(y=[0, 0, 0, 0, np.nan, np.nan, np.nan, np.nan])
    path = write(tmp_path, df)
    code, _, err = run(capsys, "estimate", path, "--metric", "tpr", "--alpha", "0.5")
    assert code == 3
    assert "degenerate" in err


def test_data_errors_report_rows(tmp_path, capsys):
    df = TOY.assign(c=[1, 1, 1, 0, 0, 0, 0, 0])
    path = write(tmp_path, df)
    code, _, err = run(capsys, "estimate", path)
    assert code == 2 and "rows 4" in err
    df = TOY.assign(f=[0.2, 0.3, 1.6, 0.7, 0.4, 0.8, 0.1, 0.55])
    code, _, err = run(capsys, "estimate", write(tmp_path, df))
    assert code == 2 and "rows 3" in err
    code, _, err = run(capsys, "estimate", write(tmp_path, TOY.drop(columns="f")))
    assert code == 2 and "'f'" in err
    code, _, err = run(capsys, "estimate", str(tmp_path / "missing.csv"))
    assert code == 2
    code, _, err = run(capsys, "estimate", write(tmp_path, TOY), "--metric", "tpr")
    assert code == 2 and "--alpha" in err


def shift_frame(m=3000, seed=0):
    rng = np.random.default_rng(seed)
    x1 = rng.normal(size=m)
    r = rng.normal(size=m)
    p = 1 / (1 + np.exp(-r))
    y = (rng.random(m) < p).astype(float)
    pi = 1 / (1 + np.exp(-(0.3 * x1 - 0.5)))
    c = (rng.random(m) < pi).astype(int)
    return pd.DataFrame({"r": r, "f": p, "y": np.where(c == 1, y, np.nan), "c": c,
                         "pi": pi, "x1": x1})


def test_shift_known_pi(tmp_path, capsys):
    df = shift_frame()
    path = write(tmp_path, df)
    for target in ("full", "unlabeled", "labeled"):
        code, out, _ = run(capsys, "estimate", path, "--metric", "auc", "--target", target,
                           "--format", "json")
        assert code == 0
        s = ShiftSample(df.r, df.f, df.y, df.c, df.pi)
        assert json.loads(out)["point"] == ppi_shift(Estimand.auc(), s, target).point


def test_shift_fitted_pi(tmp_path, capsys):
    df = shift_frame()
    path = write(tmp_path, df)
    code, out, _ = run(capsys, "estimate", path, "--metric", "tpr", "--alpha", "0",
                       "--pi", "fit:x1", "--format", "json")
    assert code == 0
    report = json.loads(out)
    assert report["target"] == "full"
    s = ShiftSample(df.r, df.f, df.y, df.c)
    model = fit_logistic_pi(df[["x1"]].to_numpy(), df.c.to_numpy())
    assert report["point"] == ppi_shift_estimated_pi(Estimand.tpr(0.0), s, model).point
    code, _, err = run(capsys, "estimate", path, "--pi", "fit:x1", "--target", "labeled")
    assert code == 2


def test_shift_overlap_violation(tmp_path, capsys):
    df = shift_frame()
    df.loc[5, "pi"] = 0.0
    code, _, err = run(capsys, "estimate", write(tmp_path, df), "--target", "full")
    assert code == 2 and "[5]" in err


def test_simulate_deterministic(tmp_path, capsys):
    argv = ["simulate", "--reps", "1", "--seed", "7", "--n", "100", "--train-size", "2000",
            "--format", "json"]
    code1, out1, _ = run(capsys, *argv)
    code2, out2, _ = run(capsys, *argv)
    assert code1 == code2 == 0
    assert out1 == out2
    summary = json.loads(out1)["summary"]
    pairs = {(row["predictor"], row["estimand"]) for row in summary}
    assert pairs == {(p, e) for p in ("ideal", "logistic", "uniform")
                     for e in ("mean", "tpr(0.6)", "fpr(0.6)", "auc")}


def test_simulate_writes_outputs_and_lambda_grid(tmp_path, capsys):
    out_dir = tmp_path / "sim"
    code, out, _ = run(capsys, "simulate", "--reps", "2", "--n", "100", "--lam", "0.5", "0.8",
                       "--predictors", "ideal", "--out", out_dir)
    assert code == 0
    assert "lambda = 0.5" in out and "lambda = 0.8" in out
    assert (out_dir / "lam=0.5" / "summary.json").exists()
    assert (out_dir / "lam=0.8" / "summary.txt").exists()


def test_simulate_invalid_config(capsys):
    code, _, _ = run(capsys, "simulate", "--reps", "0")
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--dgp", "nope"])
    assert exc.value.code == 2


def test_wine_command(tmp_path, capsys):
    red, white = write_fake_wine(tmp_path)
    argv = ["wine", "--red", red, "--white", white, "--seed", "3", "--format", "json"]
    code, out1, _ = run(capsys, *argv)
    code2, out2, _ = run(capsys, *argv)
    assert code == code2 == 0
    assert out1 == out2
    for row in json.loads(out1)["results"]:
        assert row["ppi_se"] <= row["labeled_se"]


def test_wine_missing_density(tmp_path, capsys):
    red, white = write_fake_wine(tmp_path, drop=["density"])
    code, _, err = run(capsys, "wine", "--red", red, "--white", white)
    assert code == 2
    assert "density" in err


def test_json_round_trip(tmp_path, capsys):
    path = write(tmp_path, TOY)
    _, out, _ = run(capsys, "estimate", path, "--metric", "auc", "--format", "json")
    report = json.loads(out)
    assert json.loads(json.dumps(report)) == report
    res = ppi_no_shift(Estimand.auc(), toy_data())
    assert report["se"] == res.se
