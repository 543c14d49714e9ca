from __future__ import annotations

import json
import subprocess
import sys

import pytest

from perfsim import cli
from perfsim.config import BUNDLED_DIR, ScenarioConfig, load_config

SMALL = {
    "oscillation": {"scenario": "oscillation", "p": [0.0, 0.5], "rounds": 10, "n": 2000, "seed": 3},
    "densities": {"scenario": "densities", "sigma": [0.3], "thetas": [1.0], "density_points": 101, "n": 5000, "seed": 3},
    "optima_burden": {"scenario": "optima_burden", "p": [0.0, 0.5], "sigma": [0.3], "n": 2000, "seed": 3},
    "smoothness": {"scenario": "smoothness", "sigma": [0.3], "p": [0.5], "thetas": [0.8], "n": 5000, "seed": 3},
    "estimation": {"scenario": "estimation", "alphas": [1.0, 4.0], "epsilon": 0.1, "trials": 1, "seed": 3},
    "counterexample": {"scenario": "counterexample", "epsilons": [0.01, 0.001], "n": 10000},
}


def _write(tmp_path, name, data):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(data))
    return path


def _snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


@pytest.mark.parametrize("name", sorted(p.stem for p in BUNDLED_DIR.glob("*.json")))
def test_bundled_configs_validate(name, capsys):
    assert cli.main(["validate", "--config", name]) == cli.EXIT_OK
    assert capsys.readouterr().out.startswith("ok: scenario=")


@pytest.mark.parametrize("scenario", sorted(SMALL))
def test_run_is_byte_identical(tmp_path, scenario):
    cfg = _write(tmp_path, scenario, SMALL[scenario])
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--config", str(cfg), "--out", str(a)]) == cli.EXIT_OK
    assert cli.main(["run", "--config", str(cfg), "--out", str(b)]) == cli.EXIT_OK
    snap = _snapshot(a)
    assert snap and snap == _snapshot(b)
    sha = load_config(cfg).sha256()
    for content in snap.values():
        text = content.decode()
        assert f"config_sha256={sha}" in text


def test_seed_override_changes_output(tmp_path):
    cfg = _write(tmp_path, "osc", SMALL["oscillation"])
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--config", str(cfg), "--out", str(a)]) == 0
    assert cli.main(["run", "--config", str(cfg), "--out", str(b), "--seed", "4"]) == 0
    assert _snapshot(a) != _snapshot(b)


def test_outputs_are_plot_ready(tmp_path):
    cfg = _write(tmp_path, "osc", SMALL["oscillation"])
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    lines = (tmp_path / "o" / "oscillation_summary.csv").read_text().splitlines()
    assert lines[0].startswith("# perfsim ")
    assert lines[1] == "p,verdict,limit,low,high,period,tau"
    assert len(lines) == 4
    assert (tmp_path / "o" / "trajectory_p0.5.csv").exists()


def test_estimation_json_fields(tmp_path):
    cfg = _write(tmp_path, "est", SMALL["estimation"])
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    doc = json.loads((tmp_path / "o" / "estimation.json").read_text())
    assert "provenance" in doc
    rep = doc["reports"][0]
    for key in ("epsilon", "zeta", "calls", "theta_hat", "pr_hat", "pr_true", "pr_true_bound"):
        assert key in rep
    calls = [r["calls"] for r in doc["reports"]]
    assert calls[0] > calls[1]


def test_missing_config(tmp_path, capsys):
    assert cli.main(["validate", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_CONFIG
    assert "not found" in capsys.readouterr().err


def test_malformed_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"scenario": "densities",\n  "n": }')
    assert cli.main(["validate", "--config", str(path)]) == cli.EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err


@pytest.mark.parametrize(
    "data, where",
    [
        ({"scenario": "densities", "samples": 10}, "samples"),
        ({"scenario": "warp"}, "scenario"),
        ({"scenario": "oscillation", "p": [1.5]}, "p must lie"),
        ({"scenario": "oscillation", "rounds": 3}, "rounds"),
        ({"scenario": "densities", "seed": -1}, "seed"),
        ({"scenario": "densities", "cost": {"alpha": 0}}, "cost.alpha"),
        ({"scenario": "densities", "base": {"components": [{"label": 0, "weight": 0.4, "kind": "gaussian", "mean": 0, "std": 1}]}}, "weights"),
        ([1, 2], "JSON object"),
    ],
)
def test_invalid_configs(tmp_path, capsys, data, where):
    path = _write(tmp_path, "bad", data)
    assert cli.main(["validate", "--config", str(path)]) == cli.EXIT_CONFIG
    assert where in capsys.readouterr().err


def test_invalid_sample_override(tmp_path):
    cfg = _write(tmp_path, "c", SMALL["counterexample"])
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path), "--samples", "0"]) == cli.EXIT_CONFIG


def test_runtime_error_exit_code(tmp_path, monkeypatch, capsys):
    def boom(cfg, out):
        raise RuntimeError("solver diverged")

    monkeypatch.setattr(cli, "run_scenario", boom)
    cfg = _write(tmp_path, "c", SMALL["counterexample"])
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == cli.EXIT_RUNTIME
    assert "solver diverged" in capsys.readouterr().err


def test_canonical_hash_ignores_key_order():
    a = ScenarioConfig.model_validate({"scenario": "densities", "n": 10, "seed": 1})
    b = ScenarioConfig.model_validate({"seed": 1, "n": 10, "scenario": "densities"})
    assert a.sha256() == b.sha256()
    assert a.sha256() != a.model_copy(update={"seed": 2}).sha256()


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "perfsim.cli", "--version"], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "perfsim 0.1.0"
