import csv
import json

import pytest

from ringchaos.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_passes(capsys):
    code, out, _ = run(["verify", "--model", "duffing", "--n", "8"], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 4
    assert all(line.startswith("PASS") for line in lines)


def test_unknown_subcommand(capsys):
    code, _, err = run(["frobnicate"], capsys)
    assert code == 2 and "usage" in err


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"k": 0.2, "colour": "red"}))
    code, _, err = run(["--config", str(cfg), "spectrum"], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "config"


def test_config_merged_under_flags(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"num_phi": 16, "k": 0.2}))
    out = tmp_path / "s.csv"
    assert main(["--config", str(cfg), "spectrum", "--num-phi", "20", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["phi", "branch", "re_lambda", "im_lambda"]
    assert len(rows) == 1 + 20 * 2


def test_missing_output_directory(tmp_path, capsys):
    code, _, err = run(["critical", "--out", str(tmp_path / "nope" / "c.json")], capsys)
    assert code == 2 and "does not exist" in err


def test_numerical_error_exit_code(capsys):
    code, _, err = run(["critical", "--p-range", "0,0.1"], capsys)
    assert code == 3
    assert json.loads(err)["error"] == "numerical"


def test_critical_and_coeffs_json(tmp_path):
    assert main(["critical", "--out", str(tmp_path / "c.json")]) == 0
    crit = json.loads((tmp_path / "c.json").read_text())
    assert abs(crit["p_c"] - 0.13986833) < 1e-7
    assert main(["coeffs", "--out", str(tmp_path / "k.json")]) == 0
    k = json.loads((tmp_path / "k.json").read_text())
    assert {"kappa1", "kappa2", "kappa3", "zeta", "v2"} <= set(k)
    assert k["zeta"][0] < 0


def test_gl_snapshots(tmp_path):
    snap = tmp_path / "u.csv"
    argv = ["gl", "--r", "0.5", "--t-end", "0.1", "--dt", "0.01", "--grid", "16", "--stride", "5",
            "--snapshots", str(snap), "--out", str(tmp_path / "gl.json")]
    assert main(argv) == 0
    rows = list(csv.reader(snap.open()))
    assert rows[0] == ["T2", "xi", "re_u", "im_u"]
    assert len(rows) == 1 + 3 * 16


def test_simulate_deterministic(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert main(["--seed", "5", "simulate", "--n", "4", "--k", "0.3", "--t-end", "1", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    rows = list(csv.reader(paths[0].open()))
    assert rows[0] == ["t"] + [f"y{i}" for i in range(8)]
    assert len(rows) == 1 + 11


def test_lyapunov_json(tmp_path):
    out = tmp_path / "l.json"
    argv = ["lyapunov", "--n", "2", "--k", "0", "--num-exponents", "2", "--t-transient", "10",
            "--t-total", "510", "--out", str(out)]
    assert main(argv) == 0
    res = json.loads(out.read_text())
    assert len(res["convergence_history"]) == 500
    assert all(abs(x + 0.15) < 0.005 for x in res["exponents"])


@pytest.mark.parametrize("model_file", [False, True])
def test_model_file_input(tmp_path, model_file):
    from ringchaos.model import DuffingRingParams, make_duffing_ring, model_to_dict
    argv = ["critical", "--out", str(tmp_path / "c.json")]
    if model_file:
        path = tmp_path / "m.json"
        path.write_text(json.dumps(model_to_dict(make_duffing_ring(DuffingRingParams(), 30))))
        argv += ["--model", str(path)]
    assert main(argv) == 0
    assert abs(json.loads((tmp_path / "c.json").read_text())["phi0"] - 1.2432390) < 1e-6


def test_scan_ci_rows(tmp_path):
    out = tmp_path / "records.csv"
    argv = ["--profile", "ci", "--threads", "1", "scan", "--n-list", "10,20,30", "--out", str(out)]
    assert main(argv) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["N", "k_H", "k_Ch", "k_Re"]
    assert [r[0] for r in rows[1:]] == ["10", "20", "30"]
