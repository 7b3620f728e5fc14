import json
import subprocess
import sys
import time

import numpy as np
import pytest

from ralasso.cli import main, read_dataset
from ralasso.optimizer import FitConfig
from ralasso.regression import Dataset, estimate_sigma2_cv, fit_method, predict
from ralasso.robust_mean import RaMeanConfig, ra_mean


def write_csv(path, names, rows):
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in r) + "\n")
    return str(path)


@pytest.fixture
def data_csv(tmp_path, rng):
    X = rng.standard_normal((60, 4))
    y = X @ np.array([1.5, 0.0, -2.0, 0.0]) + rng.standard_t(3, 60)
    return write_csv(tmp_path / "d.csv", ["y", "a", "b", "c", "d"], np.column_stack([y, X]))


def run(argv, monkeypatch=None):
    return main([str(a) for a in argv])


def load(path):
    with open(path) as fh:
        return json.load(fh)


def test_fit_writes_result(data_csv, tmp_path):
    out = tmp_path / "fit.json"
    assert run(["fit", "--method", "ra-lasso", "--alpha", 0.5, "--lambda", 0.1, data_csv, "-o", out]) == 0
    res = load(out)
    assert {"beta", "objective_trace", "iterations", "converged", "lambda", "alpha", "method"} <= set(res)
    ref = fit_method("ra-lasso", read_dataset(data_csv), 0.1, 0.5, FitConfig())
    assert res["beta"] == ref.beta.tolist()
    assert res["objective_trace"] == ref.objective_trace.tolist()
    prov = res["provenance"]
    assert prov["rng"] == "numpy.random.Philox" and prov["seed"] == 0 and "version" in prov
    assert prov["flags"]["alpha"] == 0.5 and prov["flags"]["method"] == "ra-lasso"


def test_fit_huge_penalty_is_zero(data_csv, tmp_path):
    out = tmp_path / "fit.json"
    assert run(["fit", "--method", "lasso", "--lambda", 1e9, data_csv, "-o", out]) == 0
    assert load(out)["beta"] == [0.0] * 4


def test_predict_round_trip_is_exact(data_csv, tmp_path):
    fit, pred = tmp_path / "fit.json", tmp_path / "pred.csv"
    run(["fit", "--method", "catoni-lasso", "--alpha", 0.7, "--lambda", 0.05, data_csv, "-o", fit])
    assert run(["predict", "--beta", fit, data_csv, "-o", pred]) == 0
    lines = [l for l in open(pred).read().splitlines() if not l.startswith("#")]
    assert lines[0] == "yhat"
    got = np.array([float(v) for v in lines[1:]])
    d = read_dataset(data_csv)
    expected = predict(fit_method("catoni-lasso", d, 0.05, 0.7).beta, d.X)
    assert np.array_equal(got, expected)


def test_residuals_are_sorted(data_csv, tmp_path):
    resid = tmp_path / "r.csv"
    run(["fit", "--method", "lasso", "--lambda", 0.1, data_csv, "-o", tmp_path / "f.json", "--residuals", resid])
    vals = [float(l) for l in open(resid).read().splitlines() if l and not l.startswith("#") and l != "residual"]
    assert len(vals) == 60 and vals == sorted(vals)


def test_mean_constant_column(tmp_path):
    path = write_csv(tmp_path / "m.csv", ["x"], [[2.75]] * 30)
    out = tmp_path / "m.json"
    assert run(["mean", "--delta", 0.05, "--v", 1.0, path, "-o", out]) == 0
    res = load(out)
    assert res["estimate"] == 2.75
    assert res["applicable"] is True and res["radius"] > 0


def test_mean_matches_in_process(tmp_path, rng):
    x = rng.standard_cauchy(101)
    path = write_csv(tmp_path / "m.csv", ["x"], x[:, None])
    out = tmp_path / "m.json"
    run(["mean", "--v", 3.0, path, "-o", out])
    assert load(out)["estimate"] == ra_mean(x, RaMeanConfig(v=3.0))


def test_mean_strict_calibration_exit(tmp_path):
    path = write_csv(tmp_path / "m.csv", ["x"], [[1.0], [2.0]])
    assert run(["mean", "--strict", path, "-o", tmp_path / "o.json"]) == 3


def test_cov_two_columns(tmp_path, rng):
    path = write_csv(tmp_path / "c.csv", ["u", "v"], rng.standard_normal((80, 2)))
    out = tmp_path / "c.json"
    assert run(["cov", path, "-o", out]) == 0
    S = np.array(load(out)["sigma_hat"])
    assert S.shape == (2, 2) and S[0, 1] == S[1, 0]


def test_cov_calibration_exit(tmp_path, rng, capsys):
    path = write_csv(tmp_path / "c.csv", ["u", "v", "w"], rng.standard_normal((10, 3)))
    assert run(["cov", path, "-o", tmp_path / "c.json"]) == 3
    assert "at least" in capsys.readouterr().err


def test_sigma2_matches_in_process(data_csv, tmp_path):
    out = tmp_path / "s.json"
    assert run(["sigma2", "--k", 5, "--method", "ra-lasso", "--alpha", 0.5, "--lambda", 0.05,
                "--seed", 3, data_csv, "-o", out]) == 0
    d = read_dataset(data_csv)
    ref = estimate_sigma2_cv(d, 5, lambda t: fit_method("ra-lasso", t, 0.05, 0.5, FitConfig()).beta, seed=3)
    assert load(out)["sigma2_hat"] == ref.sigma2_hat


def test_seed_environment_override(data_csv, tmp_path, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["sigma2", "--method", "lasso", "--lambda", 0.05, "--seed", 1, data_csv, "-o", a])
    monkeypatch.setenv("RML_SEED", "1")
    run(["sigma2", "--method", "lasso", "--lambda", 0.05, "--seed", 99, data_csv, "-o", b])
    assert load(b)["provenance"]["seed"] == 1
    assert load(a)["sigma2_hat"] == load(b)["sigma2_hat"]
    monkeypatch.setenv("RML_SEED", "x")
    assert run(["sigma2", "--method", "lasso", "--lambda", 0.05, data_csv, "-o", b]) == 2


def test_tune_cv_command(data_csv, tmp_path):
    out = tmp_path / "t.json"
    assert run(["tune", data_csv, "--method", "ra-lasso", "--lambdas", "0.01,0.1,5", "--alphas", "0.5,2",
                "-o", out]) == 0
    res = load(out)
    assert res["mode"] == "cross-validation" and len(res["scores"]) == 6
    assert res["lambda"] in (0.01, 0.1)


def test_tune_scenario_command(tmp_path):
    sc = tmp_path / "s.json"
    sc.write_text(json.dumps({"error": "two-t3", "n": 30, "p": 10, "beta_star_spec": {"s": 2},
                              "n_validation": 2, "grid": {"lambdas": [0.1, 1.0], "alphas": [0.5]}}))
    out = tmp_path / "t.json"
    assert run(["tune", "--scenario", sc, "--method", "ra-lasso", "-o", out]) == 0
    assert load(out)["mode"] == "validation"


def test_bad_csv_names_line(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("y,x\n1,2\n3,4\n5\n")
    assert run(["fit", "--method", "lasso", "--lambda", 1, p]) == 2
    assert "line 4" in capsys.readouterr().err
    p.write_text("y,x\n1,2\n3,nan\n")
    assert run(["fit", "--method", "lasso", "--lambda", 1, p]) == 2
    assert "line 3" in capsys.readouterr().err
    p.write_text("a,x\n1,2\n")
    assert run(["fit", "--method", "lasso", "--lambda", 1, p]) == 2
    assert run(["fit", "--method", "lasso", "--lambda", 1, tmp_path / "missing.csv"]) == 2
    p.write_text("y,x\n1,2\n")
    assert run(["fit", "--method", "ra-lasso", "--lambda", 1, p]) == 2  # alpha missing
    assert run(["fit", "--method", "lasso", "--lambda", -1, p]) == 2


SMALL = {"error": "lognormal", "n": 50, "p": 20, "beta_star_spec": {"s": 3, "value": 3},
         "replications": 2, "n_validation": 2, "seed": 5}


def test_simulate_small_and_deterministic(tmp_path):
    sc = tmp_path / "s.json"
    sc.write_text(json.dumps(SMALL))
    outs = []
    for w in (1, 8):
        c, j = tmp_path / f"r{w}.csv", tmp_path / f"r{w}.json"
        t = time.time()
        assert run(["simulate", sc, "--workers", w, "--csv-output", c, "--json-output", j]) == 0
        assert time.time() - t < 10
        outs.append((c.read_bytes(), j.read_bytes()))
    assert outs[0] == outs[1]
    table = json.loads(outs[0][1])["table"]
    assert set(table) == {"Lasso", "R-Lasso", "RA-Lasso", "Oracle", "RG_A,L", "RG_A,R"}
    rows = [l.split(",")[0] for l in outs[0][0].decode().splitlines() if not l.startswith("#")]
    assert rows[0] == "method"


def test_simulate_errors(tmp_path, capsys):
    sc = tmp_path / "s.json"
    sc.write_text(json.dumps({**SMALL, "n": -3}))
    assert run(["simulate", sc]) == 2
    assert "field 'n'" in capsys.readouterr().err
    sc.write_text("{not json")
    assert run(["simulate", sc]) == 2
    # support larger than n: the oracle cannot be fitted
    sc.write_text(json.dumps({**SMALL, "n": 5, "p": 10, "beta_star_spec": {"s": 8}}))
    assert run(["simulate", sc]) == 4
    assert "seed 5" in capsys.readouterr().err


def test_console_entry_point(data_csv):
    proc = subprocess.run([sys.executable, "-m", "ralasso.cli", "fit", "--method", "lasso", "--lambda", "0.2",
                           data_csv], capture_output=True, text=True)
    assert proc.returncode == 0
    again = subprocess.run([sys.executable, "-m", "ralasso.cli", "fit", "--method", "lasso", "--lambda", "0.2",
                            data_csv], capture_output=True, text=True)
    assert proc.stdout == again.stdout
    assert json.loads(proc.stdout)["method"] == "lasso"


def test_fit_exact_lad(data_csv, tmp_path):
    from ralasso.regression import fit_lad_lasso
    out = tmp_path / "f.json"
    assert run(["fit", "--method", "r-lasso", "--lad", "exact", "--lambda", 0.05, data_csv, "-o", out]) == 0
    assert load(out)["beta"] == fit_lad_lasso(read_dataset(data_csv), 0.05).beta.tolist()
