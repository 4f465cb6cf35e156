import json
import os

import pytest

from dplab.cli import run


def test_unknown_subcommand_exits_2():
    assert run(["frobnicate"]) == 2


def test_unknown_config_key_exits_2(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"eps": 0.5, "nonsense": 1}))
    code = run(["cantor", "--config", str(cfg),
                "--out", str(tmp_path / "out")])
    assert code == 2


def test_cantor_lambda_echo(tmp_path):
    out = tmp_path / "cantor"
    code = run(["cantor", "--eps", "0.5", "--depth", "6",
                "--out", str(out)])
    assert code == 0
    doc = json.load(open(out / "cantor.json"))
    assert doc["lambda"] == pytest.approx(0.25, rel=1e-12)
    assert os.path.exists(out / "resolved_config.json")
    assert os.path.exists(out / "schema.json")


def test_check_suite_passes(tmp_path):
    code = run(["check", "--samples", "500", "--out", str(tmp_path / "c")])
    assert code == 0
    doc = json.load(open(tmp_path / "c" / "check.json"))
    assert doc["failures"] == []


def test_solve_artifacts_and_determinism(tmp_path):
    args = ["solve", "--grid", "13", "--q", "1.5", "--coefficient", "plane",
            "--datum", "affine"]
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert run(args + ["--out", str(out1)]) == 0
    assert run(args + ["--out", str(out2)]) == 0
    csv1 = open(out1 / "solution.csv", "rb").read()
    csv2 = open(out2 / "solution.csv", "rb").read()
    assert csv1 == csv2  # identical config + seed -> byte-identical output
    rep = json.load(open(out1 / "report.json"))
    assert rep["converged"] is True


def test_approx_below_resolution_exits_2(tmp_path):
    code = run(["approx", "--grid", "17", "--eps-list", "0.01",
                "--out", str(tmp_path / "a")])
    assert code == 2


def test_blowup_artifacts(tmp_path):
    out = tmp_path / "b"
    code = run(["blowup", "--levels", "4", "--depth", "6",
                "--out", str(out)])
    assert code == 0
    doc = json.load(open(out / "blowup.json"))
    assert "probes" in doc
    assert os.path.exists(out / "blowup.csv")


def test_resolved_config_roundtrip(tmp_path):
    out = tmp_path / "r"
    assert run(["cantor", "--eps", "0.3", "--depth", "5",
                "--out", str(out)]) == 0
    resolved = json.load(open(out / "resolved_config.json"))
    out2 = tmp_path / "r2"
    cfg = tmp_path / "cfg.json"
    json.dump({k: v for k, v in resolved.items()
               if k not in ("out", "subcommand")},
              open(cfg, "w"))
    assert run(["cantor", "--config", str(cfg), "--out", str(out2)]) == 0
    d1 = json.load(open(out / "cantor.json"))
    d2 = json.load(open(out2 / "cantor.json"))
    assert d1 == d2
