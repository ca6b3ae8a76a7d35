import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from sparseprec.cli import _float_list, main
from sparseprec.linalg import read_matrix_csv, write_matrix_csv
from sparseprec.models import build_chain


def test_range_parsing():
    assert _float_list("1,2.5") == [1.0, 2.5]
    assert _float_list("10:40:10") == [10.0, 20.0, 30.0, 40.0]


def test_solve_command(tmp_path):
    write_matrix_csv(np.array([[1.0, 0.5], [0.5, 1.0]]), tmp_path / "s.csv")
    code = main([
        "solve", "--input", str(tmp_path / "s.csv"), "--lambda", "0.1", "--tol", "1e-9", "--max-sweeps", "100",
        "--out", str(tmp_path / "t.csv"), "--dual-out", str(tmp_path / "z.csv"), "--report", str(tmp_path / "r.json"),
    ])
    assert code == 0
    theta = read_matrix_csv(tmp_path / "t.csv").array
    np.testing.assert_allclose(theta, np.array([[1, -0.4], [-0.4, 1]]) / 0.84, atol=1e-9)
    report = json.loads((tmp_path / "r.json").read_text())
    assert set(report) == {"lambda", "sweeps", "kkt_residual", "converged", "objective"}
    assert report["converged"] and report["kkt_residual"] <= 1e-9
    z = read_matrix_csv(tmp_path / "z.csv").array
    assert z[0, 1] == -1.0


def test_diagnose_command(tmp_path):
    out = tmp_path / "d.json"
    assert main(["diagnose", "--family", "chain", "--p", "16", "--rho", "0.2", "--n", "1000", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["edges"][0] == [1, 2]
    assert doc["diagnostics"]["degree_d"] == 3
    assert set(doc["predicted_bounds"]) == {"ellinf", "frobenius", "spectral", "cov_ellinf", "cov_spectral"}
    assert doc["threshold_model_selection"] >= doc["threshold_ellinf"]


def test_diagnose_from_model_file_and_incoherent(tmp_path):
    build_chain(6, 0.3).to_json(tmp_path / "m.json")
    assert main(["diagnose", "--model", str(tmp_path / "m.json"), "--out", str(tmp_path / "a.json")]) == 0
    assert main(["diagnose", "--family", "diamond", "--rho", "0.3", "--out", str(tmp_path / "b.json")]) == 0
    doc = json.loads((tmp_path / "b.json").read_text())
    assert not doc["diagnostics"]["incoherent"] and "threshold_ellinf" not in doc


def test_witness_command(tmp_path):
    out = tmp_path / "w.json"
    args = ["witness", "--family", "chain", "--p", "12", "--rho", "0.3", "--n", "2000", "--lambda", "0.05", "--seed", "4"]
    assert main(args + ["--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["strict_dual_feasible"] == (doc["max_abs_z_sc"] < 1)
    main(args + ["--out", str(tmp_path / "w2.json")])
    assert (tmp_path / "w2.json").read_text() == out.read_text()
    assert main(["witness", "--family", "chain", "--p", "12", "--rho", "0.3", "--n", "500", "--out", str(tmp_path / "t.json")]) == 0


def test_simulate_command(tmp_path):
    out = tmp_path / "sim"
    assert main([
        "simulate", "--family", "star", "--p", "16", "--rho", "0.3", "--hub-d", "2,4", "--n", "50,200",
        "--trials", "3", "--lambda", "practical:3", "--seed", "7", "--out", str(out),
    ]) == 0
    with open(out / "rows.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 2 * 3
    assert (out / "aggregates.csv").exists()
    echo = json.loads((out / "config-echo.json").read_text())
    assert echo["config"]["seed"] == 7 and echo["config"]["lambda_rule"] == "practical:3"


def test_rates_command(tmp_path):
    out = tmp_path / "rates"
    assert main(["rates", "--p", "40", "--n", "40,80,160", "--trials", "2", "--out", str(out)]) == 0
    slopes = json.loads((out / "slopes.json").read_text())
    assert slopes and slopes[0]["hub"] == 4


def test_console_script_error_exit(tmp_path):
    (tmp_path / "bad.csv").write_text("1,0\n0,-1\n")
    proc = subprocess.run(
        [sys.executable, "-m", "sparseprec.cli", "solve", "--input", str(tmp_path / "bad.csv"), "--lambda", "0.1",
         "--out", str(tmp_path / "t.csv")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1 and "error" in proc.stderr
