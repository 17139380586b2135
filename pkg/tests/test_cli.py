import csv
import json
from importlib import resources

import pytest

from delone_lab import cli

FIXTURE = str(resources.files("delone_lab") / "fixtures" / "good_scale_1d.yaml")


def _run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


@pytest.mark.parametrize("cmd", ["gen", "verify-delone", "spectrum", "ucp1d", "lift", "patterns"])
def test_subcommands_succeed(tmp_path, cmd):
    assert _run(tmp_path, cmd, "--L", "10") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["kind"] == cmd and len(report["config_hash"]) == 64 and report["seed"] == 0


def test_ilse_subcommand(tmp_path):
    assert _run(tmp_path, "ilse", "--L", "20", "--trials", "10") == 0
    rows = list(csv.DictReader(open(tmp_path / "ilse_lifts.csv")))
    assert len(rows) == 10


def test_good_scale_fixture(tmp_path):
    assert _run(tmp_path, "good-scale", "--config", FIXTURE, "--trials", "30") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["n_trials"] == 30 and 0 <= report["p_hat"] <= 1
    assert report["seed"] == 7


def test_invalid_zeta_exit_1(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("good_scale: {zeta: 1.5}\n")
    assert _run(tmp_path, "good-scale", "--config", str(bad)) == 1


def test_missing_config_exit_1(tmp_path):
    assert _run(tmp_path, "spectrum", "--config", str(tmp_path / "nope.yaml")) == 1


def test_violation_exit_2(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("delone: {r: 1.5, R: 3.0}\n")
    assert _run(tmp_path / "o", "verify-delone", "--config", str(cfg)) == 2


def test_byte_identical_and_threads(tmp_path):
    args = ("good-scale", "--config", FIXTURE, "--trials", "30", "--L", "10")
    assert _run(tmp_path / "a", *args) == 0
    assert _run(tmp_path / "b", *args) == 0
    assert _run(tmp_path / "c", *args, "--threads", "4") == 0
    a = (tmp_path / "a" / "good_scale.csv").read_bytes()
    assert a == (tmp_path / "b" / "good_scale.csv").read_bytes() == (tmp_path / "c" / "good_scale.csv").read_bytes()
    ra = (tmp_path / "a" / "report.json").read_bytes()
    assert ra == (tmp_path / "c" / "report.json").read_bytes()


def test_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("DELONE_LAB_SEED", "42")
    monkeypatch.setenv("DELONE_LAB_OUT", str(tmp_path / "env"))
    assert cli.main(["spectrum", "--L", "5"]) == 0
    assert json.loads((tmp_path / "env" / "report.json").read_text())["seed"] == 42


def test_sweep_L(tmp_path):
    code = _run(tmp_path, "sweep", "--kind", "spectrum", "--axis", "L", "--values", "10,20,40,80,160")
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert len(rows) == 5
    assert all(r["exit_code"] == "0" for r in rows)


def test_sweep_h_richardson(tmp_path):
    cfg = tmp_path / "c.yaml"
    # The box (4.5, 5.5) sees no bumps, so lambda0(h) is the free Dirichlet value.
    cfg.write_text("L: 1\nx: [5.0]\ngrid: {h: 0.015625}\n"
                   "model: {geometry: {kind: lattice, spacing: 10.0},"
                   " bump: {delta_minus: 0.1, delta_plus: 0.2}}\n"
                   "spectrum: {disorder: background, k: 1}\n")
    code = _run(tmp_path, "sweep", "--config", str(cfg), "--kind", "spectrum", "--axis", "h",
                "--values", "0.015625,0.0078125,0.00390625")
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert float(rows[1]["richardson_ratio"]) == pytest.approx(4.0, abs=0.4)


def test_sweep_empty_values(tmp_path):
    assert _run(tmp_path, "sweep", "--kind", "spectrum", "--axis", "L", "--values", "") == 1


def test_sweep_records_failed_subrun(tmp_path):
    code = _run(tmp_path, "sweep", "--kind", "spectrum", "--axis", "L", "--values", "10,10.001")
    assert code == 1
    rows = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert rows[0]["exit_code"] == "0" and rows[1]["exit_code"] == "1"
