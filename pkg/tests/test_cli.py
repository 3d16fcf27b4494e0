import json
from pathlib import Path

import numpy as np
import pytest

from cointegra.cli import run
from cointegra.fixtures import fixture_text


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_analyze_reports_cointegration(tmp_path):
    assert run(["analyze", "--config", "fixture:coint_ou", "--out", str(tmp_path), "--quiet"]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["conditions"]["verdict"] == "Cointegrated"
    np.testing.assert_allclose(rep["structure"]["c0"], [[0, 1], [0, 1]], atol=1e-12)
    assert rep["c0_routes_agree"] is True


def test_simulate_without_seed_exits_2_and_names_the_field(tmp_path, capsys):
    cfg = json.loads(fixture_text("coint_ou"))
    del cfg["task"]["seed"]
    code = run(["simulate", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "task.seed" in capsys.readouterr().err


def test_seed_flag_supplies_the_seed(tmp_path):
    cfg = json.loads(fixture_text("coint_ou"))
    del cfg["task"]["seed"]
    cfg["task"].update({"paths": 4, "t_max": 5.0})
    code = run(["simulate", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o"), "--seed", "3", "--quiet"])
    assert code == 0
    header = (tmp_path / "o" / "paths.csv").read_text().splitlines()[0]
    assert header == "path_id,t,X_1,X_2"
    assert (tmp_path / "o" / "variance.csv").read_text().startswith("t,direction_label,variance\n")
    for name in ("ecf.json", "variance.gp", "variance.png", "paths.png"):
        assert (tmp_path / "o" / name).stat().st_size > 0
    assert (tmp_path / "o" / "variance.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_bad_json_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"model": ')
    assert run(["analyze", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_unknown_fixture_exits_2(tmp_path):
    assert run(["analyze", "--config", "fixture:nope", "--out", str(tmp_path)]) == 2


def test_wrong_model_kind_exits_2(tmp_path):
    assert run(["var-oracle", "--config", "fixture:coint_ou", "--out", str(tmp_path), "--quiet"]) == 2


def test_failed_verification_exits_1(tmp_path, capsys):
    # a tolerance below the achievable accuracy must be reported as a failure
    code = run(["kernel", "--config", "fixture:coint_ou", "--out", str(tmp_path), "--tol", "1e-30", "--quiet"])
    assert code == 1
    assert "verification failed" in capsys.readouterr().err


def test_kernel_artifacts(tmp_path):
    assert run(["kernel", "--config", "fixture:coint_ou", "--out", str(tmp_path), "--quiet"]) == 0
    check = json.loads((tmp_path / "laplace_check.json").read_text())
    assert check["pass"]
    assert (tmp_path / "kernel.csv").read_text().startswith("t,Ctilde_11,")
    assert "multiplot" in (tmp_path / "kernel.gp").read_text()


def test_mcarma_and_bridge(tmp_path):
    assert run(["mcarma", "--config", "fixture:mcarma", "--out", str(tmp_path / "m"), "--quiet"]) == 0
    bridged = tmp_path / "m" / "measure.json"
    assert run(["analyze", "--config", str(bridged), "--out", str(tmp_path / "a"), "--quiet"]) == 0
    assert json.loads((tmp_path / "a" / "report.json").read_text())["conditions"]["verdict"] == "Cointegrated"
    assert run(["bridge", "--config", "fixture:delay", "--out", str(tmp_path / "b"), "--quiet"]) == 0
    rep = json.loads((tmp_path / "b" / "bridge.json").read_text())
    assert rep["var_order"] == 101


def test_var_oracle(tmp_path):
    assert run(["var-oracle", "--config", "fixture:var", "--out", str(tmp_path), "--quiet"]) == 0
    rows = (tmp_path / "granger.csv").read_text().splitlines()
    assert rows[0] == "j,C_11,C_12,C_21,C_22"
    c0 = [float(x) for x in rows[1].split(",")]
    assert c0[0] == -1
    np.testing.assert_allclose(c0[1:], 0.5, atol=1e-12)


def test_verify_subset_is_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run(["verify", "--only", "1,7,8,9", "--out", str(out), "--quiet"]) == 0
        outs.append((out / "acceptance.json").read_bytes())
    assert outs[0] == outs[1]
    assert b"runtime" not in outs[0]


def test_text_format(tmp_path, capsys):
    cfg = json.loads(fixture_text("coint_ou"))
    cfg["output"]["format"] = "text"
    assert run(["analyze", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 0
    assert "verdict: Cointegrated" in capsys.readouterr().out
