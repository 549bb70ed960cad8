import json
from pathlib import Path

import numpy as np
import pytest

from kreinlab import cli
from kreinlab.config import parse_config
from kreinlab.errors import ConfigError
from kreinlab.grid import GridFunction, emit_grid, plane_grid, read_grid
from kreinlab.segment import build_sturm_liouville, make_segment_model

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _run(tmp_path, command, doc, *extra):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    out = tmp_path / "out"
    return cli.main([command, "--config", str(path), "--out", str(out), *extra]), out


def test_emit_grid_single_point(tmp_path):
    path = emit_grid(GridFunction([[0.1, 0, 0]], [1 / 3 + 2j]), tmp_path / "g.csv")
    lines = path.read_text().splitlines()
    assert lines == ["x,y,z,re,im", "0.10000000000000001,0,0,0.33333333333333331,2"]
    back = read_grid(path)
    assert back.values[0] == 1 / 3 + 2j


def test_emit_grid_plane_count(tmp_path):
    pts = plane_grid([0, 0, 0], [1, 0, 0], [0, 1, 0], (10, 10))
    path = emit_grid(GridFunction(pts, np.arange(100.0)), tmp_path / "g.csv")
    assert len(path.read_text().splitlines()) == 101
    with pytest.raises(ValueError):
        emit_grid(GridFunction(np.zeros((0, 3)), []), tmp_path / "e.csv")


def test_single_center_bound_states(tmp_path):
    doc = {"model": {"kind": "points", "centers": [[0, 0, 0]], "alpha": 1 / (4 * np.pi)},
           "kappa_range": [0.01, 10]}
    status, out = _run(tmp_path, "bound-states", doc)
    assert status == 0
    lines = (out / "bound_states.csv").read_text().splitlines()
    assert lines[0] == "kappa,E"
    kappa, E = map(float, lines[1].split(","))
    assert kappa == pytest.approx(1.0, abs=1e-8) and E == pytest.approx(-1.0, abs=1e-8)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["convention"] == cli.CONVENTION_NOTE
    assert summary["tolerances"] == cli.TOLERANCES


def test_finite_verify_seed_7(tmp_path):
    status, out = _run(tmp_path, "verify", json.loads((CONFIGS / "finite_verify.json").read_text()))
    assert status == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 7
    assert summary["result"]["max_oracle_deviation"] < 1e-10
    assert summary["result"]["violations"] == []


def test_seed_flag_overrides(tmp_path):
    doc = {"model": {"kind": "finite", "n": 4, "N": 2, "instances": 2}, "seed": 7}
    _, out = _run(tmp_path, "verify", doc, "--seed", "11")
    assert json.loads((out / "summary.json").read_text())["seed"] == 11


def test_verify_violation_exit_1(tmp_path):
    status, out = _run(tmp_path, "verify", json.loads((CONFIGS / "lattice_verify.json").read_text()))
    assert status == 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "violation"
    assert "lattice_rowsum_minus_bound" in summary["result"]["violations"]


def test_missing_segment_length_exit_2(tmp_path, capsys):
    status, _ = _run(tmp_path, "trace", {"model": {"kind": "segment"}})
    assert status == 2
    assert "'l'" in capsys.readouterr().err


@pytest.mark.parametrize("doc, command", [
    ({"model": {"kind": "torus"}}, "verify"),
    ({"model": {"kind": "points", "centers": [[0, 0, 0]]}}, "verify"),
    ({"model": {"kind": "points", "centers": [[0, 0, 0]], "alpha": 1}}, "green"),
    ({"model": {"kind": "finite", "n": 3, "N": 1}, "command": "green"}, "verify"),
    ({"model": {"kind": "finite", "n": 3, "N": 1}, "z": float("nan")}, "verify"),
    ({"model": {"kind": "finite", "n": 3, "N": 1}}, "trace"),
    ({"model": {"kind": "segment", "l": -1}}, "verify"),
])
def test_config_errors_exit_2(tmp_path, doc, command):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc, allow_nan=True))
    assert cli.main([command, "--config", str(path), "--out", str(tmp_path)]) == 2


def test_unreadable_config_exit_2(tmp_path):
    assert cli.main(["verify", "--config", str(tmp_path / "none.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["verify", "--config", str(bad)]) == 2


def test_model_errors_exit_3(tmp_path):
    doc = {"model": {"kind": "points", "centers": [[0, 0, 0], [0, 0, 0]], "alpha": 1},
           "grid": {"kind": "points", "points": [[1, 1, 1]]}}
    assert _run(tmp_path, "green", doc)[0] == 3
    # potential shifting the discrete lambda_1 exactly to zero
    lam = build_sturm_liouville(make_segment_model(1.0, 0.0, 40)).eigenvalues[0]
    doc = {"model": {"kind": "segment", "l": 1.0, "n_nodes": 40, "potential": -lam}}
    assert _run(tmp_path, "verify", doc)[0] == 3


def test_threads_env(tmp_path, monkeypatch):
    doc = {"model": {"kind": "finite", "n": 4, "N": 1, "instances": 1}}
    monkeypatch.setenv(cli.THREADS_ENV, "1")
    assert _run(tmp_path, "verify", doc)[0] == 0
    monkeypatch.setenv(cli.THREADS_ENV, "zero")
    assert _run(tmp_path, "verify", doc)[0] == 2


def test_green_points_and_segment(tmp_path):
    status, out = _run(tmp_path, "green",
                       json.loads((CONFIGS / "two_center_green.json").read_text()))
    assert status == 0
    assert len((out / "green.csv").read_text().splitlines()) == 101
    doc = {"model": {"kind": "segment", "l": 1.0, "n_nodes": 64}, "z": [0, 1],
           "source": {"center": [0.5, 1.0, 0.0], "width": 0.3},
           "grid": {"kind": "box", "lo": [0, 0.5, -0.5], "hi": [1, 1.5, 0.5], "shape": [2, 2, 2]}}
    status, out = _run(tmp_path, "green", doc)
    assert status == 0
    assert read_grid(out / "green.csv").points.shape == (8, 3)


def test_trace_command(tmp_path):
    status, out = _run(tmp_path, "trace", json.loads((CONFIGS / "segment_trace.json").read_text()))
    assert status == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["result"]["max_rel_error"] < 1e-3
    assert len((out / "trace.csv").read_text().splitlines()) == 1 + 2 * 3


def test_segment_bound_states(tmp_path):
    lam = build_sturm_liouville(make_segment_model(1.0, 0.0, 200)).eigenvalues[0]
    doc = {"model": {"kind": "segment", "l": 1.0, "potential": -(lam - 0.3)},
           "kappa_range": [0.05, 30]}
    status, out = _run(tmp_path, "bound-states", doc)
    assert status == 0
    assert len((out / "bound_states.csv").read_text().splitlines()) == 2


def test_parse_config_defaults():
    cfg = parse_config({"model": {"kind": "segment", "l": 2}}, "verify")
    assert cfg.seed == 0 and cfg.z == -1 and cfg.kind == "segment"
    with pytest.raises(ConfigError):
        parse_config({"model": {"kind": "segment", "l": 2}, "seed": -1}, "verify")
