import json
import subprocess
import sys

import numpy as np
import pytest

from polaron_lab import cli


def write_config(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_budget_optimize_run(tmp_path):
    cfgp = write_config(tmp_path, "b.json", {"operation": "optimize"})
    out = tmp_path / "run"
    assert cli.main(["budget", "--config", cfgp, "--out", str(out)]) == 0
    rep = json.loads((out / "budget.json").read_text())
    assert rep["max_order"] == "3/2"
    assert rep["exponents"] == {"d": "-1/2", "k": "3/2", "p": "0", "e": "3/2"}
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["subcommand"] == "budget"
    assert "version" in man and "timestamp" in man


def test_budget_orders_run(tmp_path):
    cfgp = write_config(tmp_path, "o.json", {
        "operation": "orders",
        "exponents": {"d": "-1/7", "k": "76/49", "p": "5/49", "e": "64/49"},
    })
    out = tmp_path / "run"
    assert cli.main(["budget", "--config", cfgp, "--out", str(out)]) == 0
    rep = json.loads((out / "budget.json").read_text())
    assert rep["max_order"] == "13/7"
    assert rep["binding"] == ["T1"]


def test_pekar_run_and_determinism(tmp_path):
    cfgp = write_config(tmp_path, "p.json", {
        "potential": {"kind": "zero"},
        "grid": {"half_width": 40.0, "points": 1025},
    })
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert cli.main(["pekar", "--config", cfgp, "--out", str(out1)]) == 0
    assert cli.main(["pekar", "--config", cfgp, "--out", str(out2)]) == 0
    rec = json.loads((out1 / "pekar.json").read_text())
    assert abs(rec["energy"] + 1.0 / 12.0) < 1e-4
    assert set(rec) == {"energy", "lambda", "residual", "iterations"}
    assert (out1 / "pekar.json").read_bytes() == (out2 / "pekar.json").read_bytes()
    assert (out1 / "profile.csv").read_bytes() == (out2 / "profile.csv").read_bytes()
    header = (out1 / "profile.csv").read_text().splitlines()[0]
    assert header == "x,value"


def test_branch_run_sorts_ladder(tmp_path):
    cfgp = write_config(tmp_path, "br.json", {
        "potential": {"kind": "zero"},
        "lambda_grid": {"start": -0.4, "stop": -1.0, "count": 3},
    })
    out = tmp_path / "run"
    assert cli.main(["branch", "--config", cfgp, "--out", str(out)]) == 0
    lines = (out / "branch.csv").read_text().splitlines()
    assert lines[0] == "lambda,norm2_sq"
    lams = [float(l.split(",")[0]) for l in lines[1:]]
    assert lams == sorted(lams) == [-1.0, -0.7, -0.4]
    norms = [float(l.split(",")[1]) for l in lines[1:]]
    for lam, nrm in zip(lams, norms):
        assert abs(nrm - 2.0 * np.sqrt(-lam)) < 1e-6


def test_perturb_run_zero_potential_has_null_pairing(tmp_path):
    cfgp = write_config(tmp_path, "pe.json", {
        "potential": {"kind": "zero"},
        "measure": {"kind": "gaussian", "center": 0.0, "width": 0.5},
        "deltas": [0.1],
    })
    out = tmp_path / "run"
    assert cli.main(["perturb", "--config", cfgp, "--out", str(out)]) == 0
    lines = (out / "bracket.csv").read_text().splitlines()
    assert lines[0] == "delta,upper,quotient,lower"
    assert len(lines) == 2
    rep = json.loads((out / "perturb.json").read_text())
    assert rep["pairing"] is None


def test_bad_potential_kind_names_field(tmp_path, capsys):
    cfgp = write_config(tmp_path, "bad.json", {"potential": {"kind": "morse"}})
    assert cli.main(["pekar", "--config", cfgp, "--out", str(tmp_path / "x")]) == 1
    assert "potential.kind" in capsys.readouterr().err


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfgp = write_config(tmp_path, "bad.json", {"potental": {"kind": "zero"}})
    assert cli.main(["pekar", "--config", cfgp, "--out", str(tmp_path / "x")]) == 1
    assert "potental" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["pekar", "--config", str(tmp_path / "nope.json")]) == 1


def test_subcommand_mismatch(tmp_path):
    cfgp = write_config(tmp_path, "m.json", {"subcommand": "branch", "operation": "optimize"})
    assert cli.main(["budget", "--config", cfgp, "--out", str(tmp_path / "x")]) == 1


def test_bad_deltas_rejected_before_compute(tmp_path, capsys):
    cfgp = write_config(tmp_path, "d.json", {
        "potential": {"kind": "sech2", "amplitude": 2.0, "width": 1.0},
        "measure": {"kind": "gaussian", "center": 0.0, "width": 0.5},
        "deltas": [0.1, 0.6],
    })
    assert cli.main(["perturb", "--config", cfgp, "--out", str(tmp_path / "x")]) == 1
    assert "deltas" in capsys.readouterr().err


def test_scan_failure_exits_two(tmp_path, capsys):
    cfgp = write_config(tmp_path, "s.json", {
        "alphas": [8.0],
        "potential": {"kind": "sech2", "amplitude": 2.0, "width": 1.0},
        "measure": {"kind": "gaussian", "center": 0.0, "width": 0.5},
    })
    out = tmp_path / "run"
    assert cli.main(["scan", "--config", cfgp, "--out", str(out)]) == 2
    assert "alpha=8" in capsys.readouterr().err
    assert not (out / "manifest.json").exists()


def test_usage_error_maps_to_exit_one():
    with pytest.raises(SystemExit) as err:
        cli.main(["pekar"])
    assert isinstance(err.value.code, str)  # string codes exit with status 1


def test_installed_entry_point(tmp_path):
    cfgp = write_config(tmp_path, "b.json", {"operation": "optimize"})
    proc = subprocess.run(
        ["polaron-lab", "budget", "--config", cfgp, "--out", str(tmp_path / "run")],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    rep = json.loads((tmp_path / "run" / "budget.json").read_text())
    assert rep["max_order"] == "3/2"
