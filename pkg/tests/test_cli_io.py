import csv
import json
import os

import numpy as np
import pytest

from qrshrink.cli import main
from qrshrink.data import Dataset
from qrshrink.io import dataset_to_csv, load_csv, quantile_process, write_csv


@pytest.fixture
def toy_csv(tmp_path, rng):
    X = rng.standard_normal((30, 3))
    y = X @ np.array([2.0, -1.0, 0.0]) + rng.standard_normal(30)
    path = tmp_path / "toy.csv"
    with open(path, "w") as fh:
        fh.write("y,x1,x2,x3\n")
        for i in range(30):
            fh.write(",".join(repr(float(v)) for v in [y[i], *X[i]]) + "\n")
    return str(path)


class TestLoadCsv:
    def test_basic_shape(self, toy_csv):
        data, report = load_csv(toy_csv, "y", ["x1", "x2"])
        assert (data.n, data.p) == (30, 2)
        assert data.labels == ["x1", "x2"]
        assert report["n_dropped"] == 0

    def test_default_covariates(self, toy_csv):
        data, _ = load_csv(toy_csv, "y")
        assert data.p == 3

    def test_missing_column_named(self, toy_csv):
        with pytest.raises(ValueError, match="so3"):
            load_csv(toy_csv, "y", ["x1", "so3"])

    def test_missing_response_named(self, toy_csv):
        with pytest.raises(ValueError, match="resp"):
            load_csv(toy_csv, "resp")

    def test_non_numeric_cell_located(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("y,x\n1.0,2.0\n3.0,oops\n")
        with pytest.raises(ValueError, match=r"row 2.*'x'|'x'.*row 2"):
            load_csv(str(p), "y")

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_csv(str(p), "y")

    def test_na_rows_dropped_and_reported(self, tmp_path):
        p = tmp_path / "na.csv"
        p.write_text("y,x\n1.0,2.0\nNA,3.0\n4.0,\n5.0,6.0\n")
        data, report = load_csv(str(p), "y")
        assert data.n == 2
        assert report["n_dropped"] == 2
        assert report["dropped_rows"] == [1, 2]

    def test_round_trip_full_precision(self, tmp_path, rng):
        X = rng.standard_normal((12, 2)) * np.pi
        y = rng.standard_normal(12) / 3
        d = Dataset(X, y, labels=["a", "b"])
        path = str(tmp_path / "rt.csv")
        dataset_to_csv(path, d)
        back, _ = load_csv(path, "y", ["a", "b"])
        assert np.array_equal(back.X, d.X)
        assert np.array_equal(back.y, d.y)


class TestWriteCsv:
    def test_atomic_and_typed(self, tmp_path):
        path = str(tmp_path / "t.csv")
        write_csv(path, ["a", "b"], [[1.5, None], [0.1 + 0.2, "x"]])
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["a", "b"]
        assert float(rows[2][0]) == 0.1 + 0.2  # round-trip exact


class TestQuantileProcess:
    def test_default_grid_is_nineteen_taus(self, rng):
        X = rng.standard_normal((40, 2))
        y = X[:, 0] + rng.standard_normal(40)
        rows, failures = quantile_process(Dataset(X, y), n_boot=0, seed=0)
        taus = sorted({r["tau"] for r in rows})
        assert len(taus) == 19
        assert taus[0] == pytest.approx(0.05)
        assert taus[-1] == pytest.approx(0.95)

    def test_no_bootstrap_empty_bands(self, rng):
        X = rng.standard_normal((30, 2))
        y = X[:, 0] + rng.standard_normal(30)
        rows, _ = quantile_process(Dataset(X, y), tau_grid=[0.5], n_boot=0)
        assert all(r["band_low"] is None for r in rows)
        assert all(np.isfinite(r["ols_low"]) for r in rows)

    def test_location_shift_slopes_flat(self, rng):
        X = rng.standard_normal((400, 2))
        y = X @ np.array([2.0, -1.0]) + rng.standard_normal(400)
        rows, _ = quantile_process(Dataset(X, y),
                                   tau_grid=[0.2, 0.5, 0.8], n_boot=0)
        for name, truth in (("x1", 2.0), ("x2", -1.0)):
            ests = [r["estimate"] for r in rows if r["coefficient"] == name]
            assert np.ptp(ests) < 0.35
            assert np.allclose(ests, truth, atol=0.35)
        icp = [r["estimate"] for r in rows if r["coefficient"] == "(intercept)"]
        assert icp[0] < icp[1] < icp[2]  # shifts with the error quantile

    def test_bands_cover_estimate(self, rng):
        X = rng.standard_normal((60, 1))
        y = X[:, 0] + rng.standard_normal(60)
        rows, failures = quantile_process(Dataset(X, y), tau_grid=[0.5],
                                          n_boot=50, seed=1)
        assert failures == 0
        for r in rows:
            assert r["band_low"] <= r["band_high"]


class TestCli:
    def test_fit_and_manifest(self, toy_csv, tmp_path):
        out = str(tmp_path / "out")
        code = main(["fit", "--data", toy_csv, "--response", "y",
                     "--tau", "0.5", "--out-dir", out])
        assert code == 0
        assert os.path.exists(os.path.join(out, "fit_coefficients.csv"))
        with open(os.path.join(out, "fit_manifest.json")) as fh:
            man = json.load(fh)
        assert man["command"] == "fit"
        assert "versions" in man and "qrshrink" in man["versions"]

    def test_missing_column_exit_code(self, toy_csv, tmp_path):
        code = main(["fit", "--data", toy_csv, "--response", "y",
                     "--covariates", "so3", "--out-dir", str(tmp_path / "o")])
        assert code == 3

    def test_missing_file_exit_code(self, tmp_path):
        code = main(["fit", "--data", str(tmp_path / "nope.csv"),
                     "--response", "y", "--out-dir", str(tmp_path / "o")])
        assert code == 3

    def test_simulate_reproducible_outputs(self, tmp_path):
        args = ["simulate", "--rho", "0.2", "--n-reps", "3", "--tau", "0.5",
                "--seed", "11"]
        o1, o2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(args + ["--out-dir", o1]) == 0
        assert main(args + ["--out-dir", o2]) == 0
        t1 = open(os.path.join(o1, "simulated_pmad.csv")).read()
        t2 = open(os.path.join(o2, "simulated_pmad.csv")).read()
        assert t1 == t2

    def test_risk_block_diagonal_columns_identical(self, tmp_path):
        p1, p2 = 2, 3
        G = np.diag([1.0, 2.0, 0.5, 1.5, 0.8])
        gpath = str(tmp_path / "g.csv")
        np.savetxt(gpath, G, delimiter=",")
        out = str(tmp_path / "o")
        code = main(["risk", "--p1", str(p1), "--p2", str(p2),
                     "--gamma-csv", gpath, "--out-dir", out])
        assert code == 0
        with open(os.path.join(out, "risk_curve.csv")) as fh:
            rows = list(csv.DictReader(fh))
        for row in rows:
            vals = [float(row[k]) for k in ("FM", "SM", "PT", "S", "PS")]
            assert np.ptp(vals) < 1e-10

    def test_diagnose_white_noise(self, tmp_path, rng):
        X = rng.standard_normal((300, 2))
        y = rng.standard_normal(300)
        path = str(tmp_path / "wn.csv")
        dataset_to_csv(path, Dataset(X, y, labels=["x1", "x2"]))
        out = str(tmp_path / "o")
        code = main(["diagnose", "--data", path, "--response", "y",
                     "--max-lag", "2", "--out-dir", out])
        assert code == 0
        with open(os.path.join(out, "durbin_watson.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert abs(float(rows[0]["dw"]) - 2.0) < 0.3

    def test_evaluate_kfold(self, toy_csv, tmp_path):
        out = str(tmp_path / "o")
        code = main(["evaluate", "--data", toy_csv, "--response", "y",
                     "--keep", "1", "--mode", "kfold", "--k", "3",
                     "--tau", "0.5", "--estimators", "FM", "SM",
                     "--out-dir", out])
        assert code == 0
        with open(os.path.join(out, "evaluate_pmad.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert {r["estimator"] for r in rows} == {"FM", "SM"}

    def test_qprocess_table(self, toy_csv, tmp_path):
        out = str(tmp_path / "o")
        code = main(["qprocess", "--data", toy_csv, "--response", "y",
                     "--tau-count", "3", "--n-boot", "5", "--out-dir", out])
        assert code == 0
        with open(os.path.join(out, "quantile_process.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4 * 3  # intercept + 3 covariates, 3 taus

    def test_config_file_merging(self, toy_csv, tmp_path):
        conf = tmp_path / "conf.json"
        conf.write_text(json.dumps({"tau": [0.25]}))
        out = str(tmp_path / "o")
        code = main(["fit", "--data", toy_csv, "--response", "y",
                     "--config", str(conf), "--out-dir", out])
        assert code == 0
        with open(os.path.join(out, "fit_coefficients.csv")) as fh:
            rows = list(csv.DictReader(fh))
        assert {r["tau"] for r in rows} == {"0.25", "ols"}

    def test_shrink_small_p2_degrades(self, toy_csv, tmp_path):
        out = str(tmp_path / "o")
        code = main(["shrink", "--data", toy_csv, "--response", "y",
                     "--test-idx", "3", "--tau", "0.5", "--out-dir", out])
        assert code == 0
        with open(os.path.join(out, "shrinkage_coefficients.csv")) as fh:
            kinds = {r["estimator"] for r in csv.DictReader(fh)}
        assert kinds == {"FM", "SM", "PT"}
