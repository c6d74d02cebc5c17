import json
import math
import os
import subprocess
import sys
from pathlib import Path

import pytest

from polymerlab.cli import main
from polymerlab.reporting import read_csv_report


def run_cli(args, **kw):
    return main(list(args))


def test_enumerate_to_file(tmp_path):
    out = tmp_path / "enum.json"
    code = run_cli(["enumerate", "--family", "simple", "--n", "2",
                    "--beta", "0.5", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["Z"] == pytest.approx((1 + math.exp(-1)) / 2)
    assert doc["meta"]["config"]["beta"] == 0.5
    assert doc["endpoint_pmf"]["0"] == pytest.approx(
        math.exp(-1) / (1 + math.exp(-1)))


def test_enumerate_saw_model(tmp_path):
    out = tmp_path / "saw.json"
    assert run_cli(["enumerate", "--family", "simple", "--n", "3",
                    "--model", "saw", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["Z"] == pytest.approx(0.25)


def test_budget_exit_code(capsys):
    assert run_cli(["enumerate", "--family", "simple", "--n", "64",
                    "--beta", "0.1"]) == 3


def test_config_error_exit_code():
    assert run_cli(["mc", "--family", "simple", "--n", "4", "--model",
                    "attraction", "--beta", "0.1", "--gamma", "0.5",
                    "--tours", "4", "--replicas", "2"]) == 2


def test_mc_json_payload(tmp_path):
    out = tmp_path / "mc.json"
    code = run_cli(["mc", "--family", "simple", "--n", "10", "--beta", "0.2",
                    "--sampler", "importance", "--samples", "500",
                    "--replicas", "3", "--seed", "5", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert {"theta_hat", "theta_se", "r_hat", "r_se", "sigma_star_hat",
            "ess"} <= set(doc)
    assert len(doc["replicas"]) == 3
    assert doc["meta"]["seed"] == 5


def test_mc_reproducible_byte_identical(tmp_path):
    out = tmp_path / "mc.json"
    args = ["mc", "--family", "uniform_range", "--L", "2", "--n", "15",
            "--beta", "0.1", "--tours", "40", "--replicas", "2",
            "--seed", "9", "--out", str(out)]
    assert run_cli(args) == 0
    first = out.read_bytes()
    assert run_cli(args) == 0
    assert out.read_bytes() == first


def test_rate_csv_and_figure(tmp_path):
    out = tmp_path / "rate.csv"
    code = run_cli(["rate", "--family", "simple", "--n", "10",
                    "--beta", "0.3", "--scaled", "--b-grid", "0.4:2.0:5",
                    "--out", str(out)])
    assert code == 0
    meta, header, rows = read_csv_report(out)
    assert header[:3] == ["b_or_theta", "value", "side"]
    assert len(rows) == 5
    assert meta["config"]["beta"] == 0.3
    assert (tmp_path / "rate.png").exists()


def test_lemma_bn_output(tmp_path):
    out = tmp_path / "bn.csv"
    assert run_cli(["lemma-bn", "--family", "simple", "--n", "30",
                    "--out", str(out), "--no-figures"]) == 0
    meta, header, rows = read_csv_report(out)
    assert header == ["n", "B_n", "B_n_over_n", "E_G_n"]
    assert float(rows[0][1]) == pytest.approx(-2.0)
    assert len(rows) == 30
    assert not (tmp_path / "bn.png").exists()


def test_renewal_json(tmp_path):
    out = tmp_path / "renewal.json"
    assert run_cli(["renewal", "--family", "simple", "--T", "2", "--N", "4",
                    "--mode", "saw", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["c"][1] == pytest.approx(0.5)
    assert doc["eps"] == pytest.approx(1 / math.sqrt(2))
    assert doc["max_residual"] <= 1e-12
    assert doc["pi_bound_violations"] == []
    assert doc["contraction"]["hypothesis_ok"] is False


def test_sweep_cli_full_outputs(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"experiment": "beta", "family": "simple",
                               "betas": [0.4, 0.2], "replicas": 2,
                               "tours": 40, "seed": 3, "n_coeff": 30,
                               "anchor": False}))
    out = tmp_path / "rep.csv"
    assert run_cli(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    meta, header, rows = read_csv_report(out)
    assert header[0] == "experiment" and len(rows) == 2
    side = json.loads((tmp_path / "rep.json").read_text())
    assert "rows" in side and "reference" in side
    assert (tmp_path / "rep.png").exists()


def test_sweep_rejects_invalid_schedule(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"experiment": "coupled", "family": "simple",
                               "kind": "beta", "exponent": 2.0,
                               "n_values": [16, 32], "replicas": 2,
                               "tours": 10, "anchor": False}))
    out = tmp_path / "rep.csv"
    assert run_cli(["sweep", "--config", str(cfg), "--out", str(out)]) == 2
    assert run_cli(["sweep", "--config", str(cfg), "--out", str(out),
                    "--allow-invalid-schedule"]) == 0


def test_threads_env_override(tmp_path, monkeypatch):
    out = tmp_path / "enum.json"
    monkeypatch.setenv("POLYMERLAB_THREADS", "2")
    assert run_cli(["--threads", "1", "enumerate", "--family",
                    "uniform_range", "--L", "2", "--n", "6", "--beta", "0.1",
                    "--out", str(out)]) == 0
    b = json.loads(out.read_text())
    monkeypatch.delenv("POLYMERLAB_THREADS")
    out2 = tmp_path / "enum2.json"
    assert run_cli(["--threads", "1", "enumerate", "--family",
                    "uniform_range", "--L", "2", "--n", "6", "--beta", "0.1",
                    "--out", str(out2)]) == 0
    a = json.loads(out2.read_text())
    assert a["Z"] == b["Z"]
    assert a["endpoint_pmf"] == b["endpoint_pmf"]


def test_custom_family_flag(tmp_path):
    out = tmp_path / "c.json"
    assert run_cli(["enumerate", "--family", "custom", "--pmf",
                    '{"-1": 0.5, "1": 0.5}', "--n", "2", "--beta", "0.0",
                    "--out", str(out)]) == 0
    assert json.loads(out.read_text())["Z"] == pytest.approx(1.0)


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "polymerlab.cli",
                           "enumerate", "--family", "simple", "--n", "2",
                           "--beta", "0"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert '"Z": 1.0' in proc.stdout
