import csv
import json
import os
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

import eqfuller
from eqfuller import cli
from eqfuller.errors import InvarianceViolation
from eqfuller.fuller_index import fuller_from_orbits
from eqfuller.nondeg_criteria import (DEGENERATE, NONDEG_H, NONDEG_LIN, NONDEG_PARAM,
                                      NONDEG_RANK2)
from eqfuller.periodic_orbits import stratum_dets

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(tmp_path, command, cfg, *extra):
    if isinstance(cfg, dict):
        path = tmp_path / f"{command}.cfg.json"
        path.write_text(json.dumps(cfg))
    else:
        path = CONFIGS / cfg
    out = tmp_path / "out"
    code = cli.main([command, "--config", str(path), "--out", str(out), *extra])
    return code, out


def load(out, name):
    return json.loads((out / name).read_text())


def test_marks_c2(tmp_path, capsys):
    code, out = run(tmp_path, "marks", "marks_c2.json")
    assert code == 0
    data = load(out, "marks.json")
    assert data["lattice"]["marks"] == [[1, 0], [1, 2]]
    assert data["version"] == eqfuller.__version__
    assert data["config"] == {"group": {"builtin": "cyclic", "n": 2}}
    assert "Z2" in capsys.readouterr().out


def test_marks_trivial_and_s3(tmp_path):
    code, out = run(tmp_path, "marks", {"group": {"builtin": "trivial"}})
    assert code == 0 and load(out, "marks.json")["lattice"]["marks"] == [[1]]
    code, out = run(tmp_path, "marks", "marks_s3.json")
    marks = load(out, "marks.json")["lattice"]["marks"]
    assert code == 0 and len(marks) == 4
    assert marks[-1] == [1, 2, 3, 6]


def test_bad_configs_exit_one(tmp_path):
    # not closed under multiplication
    bad_group = {"group": {"order": 2, "mul": [[0, 1], [1, 1]]}}
    assert run(tmp_path, "marks", bad_group)[0] == 1
    broken = tmp_path / "broken.json"
    broken.write_text("{\"group\": ")
    assert cli.main(["marks", "--config", str(broken), "--out", str(tmp_path)]) == 1
    assert cli.main(["index", "--config", str(tmp_path / "missing.json")]) == 1
    assert run(tmp_path, "index", {"system": "hopf_z2"})[0] == 1
    assert run(tmp_path, "index", {"system": "hopf_z2", "window": [8, 4]})[0] == 1
    assert run(tmp_path, "index", {"system": "no_such", "window": [4, 8]})[0] == 1
    assert run(tmp_path, "marks", "marks_c2.json", "--threads", "0")[0] == 1
    assert run(tmp_path, "marks", "marks_c2.json", "--seed", str(2 ** 64))[0] == 1


def test_index_hopf_z2(tmp_path):
    code, out = run(tmp_path, "index", "index_hopf_z2.json", "--seed", "7")
    assert code == 0
    data = load(out, "index.json")
    assert data["index"] == {"(e)": "1/1"}
    assert data["solution_property"] is True
    # antipodal Z2 on the plane: only the origin is fixed, yet (Z2) is realized there
    assert data["unrealized_classes"] == []
    assert data["config"]["seeds"]["seed"] == 7
    rows = list(csv.DictReader((out / "orbits.csv").open()))
    assert len(rows) == 1 and rows[0]["isotropy"] == "(e)"
    assert abs(float(rows[0]["p"]) - 2 * np.pi) < 1e-6


def test_index_axis_and_empty_window(tmp_path):
    code, out = run(tmp_path, "index", "index_axis_z2.json")
    data = load(out, "index.json")
    assert code == 0 and data["index"] == {"(Z2)": "1/1"}
    assert data["unrealized_classes"] == []
    code, out = run(tmp_path, "index", "index_empty_window.json")
    assert code == 0 and load(out, "index.json")["index"] == {}


def test_index_degenerate_exit_two(tmp_path, monkeypatch):
    # inject a flat orbit: multiplier exactly one on its only stratum
    real = cli.fuller_index

    def flattened(system, lam, window, **kw):
        res = real(system, lam, window, **kw)
        orbits = [replace(o, DP=np.eye(o.DP.shape[0]),
                          strata=stratum_dets(o.psys, np.eye(o.DP.shape[0]), o.multiplicity))
                  for o in res.orbits]
        return fuller_from_orbits(system.action.group.lattice, orbits, window)

    monkeypatch.setattr(cli, "fuller_index", flattened)
    code, out = run(tmp_path, "index", "index_hopf_z2.json")
    assert code == 2
    data = load(out, "index.json")
    assert data["error"] == "DegenerateField"
    assert not (out / "orbits.csv").exists()


def test_sweep_hopf_param_passes(tmp_path):
    cfg = json.loads((CONFIGS / "sweep_hopf_param.json").read_text())
    cfg["grid"] = {"n": 6, "lo": 0.0, "hi": 1.0}
    code, out = run(tmp_path, "sweep", cfg)
    assert code == 0
    data = load(out, "sweep.json")
    assert data["verdict"]["verdict"] == "pass"
    assert data["verdict"]["index"] == {"(e)": "1/1"}
    assert len(load(out, "trace.json")["trace"]) == 6
    assert load(out, "events.json")["events"] == []
    rows = list(csv.DictReader((out / "branches.csv").open()))
    assert len(rows) == 6


def test_sweep_flip_certified(tmp_path):
    code, out = run(tmp_path, "sweep", "sweep_flip.json")
    assert code == 0
    data = load(out, "sweep.json")
    (event,) = data["sweep"]["events"]
    assert event["kind"] == "flip"
    assert data["verdict"]["index"] == {"(e)": "3/2"}
    assert len(data["verdict"]["certificates"]) == 1


def test_sweep_inadmissible_exit_four(tmp_path):
    code, out = run(tmp_path, "sweep", "sweep_inadmissible.json")
    assert code == 4
    data = load(out, "sweep.json")
    assert data["verdict"]["verdict"] == "inadmissible"
    assert load(out, "events.json")["events"][0]["kind"] == "window_exit"


def test_sweep_violation_exit_three(tmp_path, monkeypatch):
    def broken(result):
        raise InvarianceViolation("index jumped", (0.4, 0.5), None, None)

    monkeypatch.setattr(cli, "verify_invariance", broken)
    cfg = json.loads((CONFIGS / "sweep_hopf_param.json").read_text())
    cfg["grid"] = {"n": 3, "lo": 0.0, "hi": 1.0}
    code, out = run(tmp_path, "sweep", cfg)
    assert code == 3
    assert load(out, "sweep.json")["verdict"]["bracket"] == [0.4, 0.5]


def test_check(tmp_path):
    code, out = run(tmp_path, "check", "check.json", "--seed", "3")
    assert code == 0
    data = load(out, "check.json")
    eq = data["equivariance"]
    assert eq["pass"] and eq["residual"] < 1e-12 and eq["seed"] == 3
    assert [e["verdict"] for e in data["z2"]] == [NONDEG_PARAM, DEGENERATE, NONDEG_H]
    assert [e["verdict"] for e in data["s1"]] == [DEGENERATE, NONDEG_RANK2, NONDEG_LIN]


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "eqfuller.cli", "marks", "--config",
                           str(CONFIGS / "marks_c2.json"), "--out", str(tmp_path)],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "marks.json").exists()
    assert not [p for p in os.listdir(tmp_path) if p.startswith(".tmp-")]
