import json
import subprocess
import sys

import pytest

from nlspread.lab.cli import main, parse_kernel
from nlspread.errors import ConfigError
from nlspread.kernel import CutOff, Gaussian


def write_cfg(path, solver=None, experiment=None, **top):
    raw = {
        "solver": solver
        or {"d": 1, "nu": 0.1, "mu": 1, "h0": 1, "n": 64, "t_end": 2, "kernel": {"type": "gaussian", "params": {"sigma": 1}}},
        **top,
    }
    if experiment:
        raw["experiment"] = experiment
    path.write_text(json.dumps(raw))
    return path


def test_parse_kernel_forms():
    assert parse_kernel("gaussian:sigma=2") == Gaussian(2.0)
    k = parse_kernel('{"type": "cutoff", "params": {"base": {"type": "power2"}, "radius": 5}}')
    assert isinstance(k, CutOff)
    with pytest.raises(ConfigError):
        parse_kernel("gaussian:sigma")
    with pytest.raises(ConfigError):
        parse_kernel("mystery")


def test_eigen_command(capsys):
    assert main(["eigen", "--d", "1", "--a0", "1", "--nu", "0", "--h", "2", "--kernel", "gaussian:sigma=1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {"lambda_p", "residual", "iterations"}
    assert out["lambda_p"] < 1


def test_critical_length_precondition(capsys):
    assert main(["critical-length", "--d", "1", "--f0", "1", "--nu", "0", "--kernel", "gaussian"]) == 4


def test_missing_argument_is_config_error(capsys):
    assert main(["eigen", "--d", "1", "--nu", "0", "--kernel", "gaussian"]) == 2
    assert main(["simulate"]) == 2


def test_bad_config_exit_code(tmp_path, capsys):
    p = write_cfg(tmp_path / "c.json", solver={"d": 1, "nu": 0, "mu": -1, "h0": 1, "kernel": {"type": "gaussian"}})
    assert main(["--config", str(p), "simulate"]) == 2
    assert "solver.mu" in capsys.readouterr().err


def test_unknown_subcommand_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 2


def test_simulate_writes_outputs(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", record_timing=False)
    out = tmp_path / "out"
    assert main(["--quiet", "simulate", "--config", str(cfg), "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert {p.name for p in out.iterdir()} == {"summary.json", "timeseries.csv", "snapshots.csv"}
    summary = json.loads((out / "summary.json").read_text())
    assert summary["wall_time"] is None
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert main(["--quiet", "simulate", "--config", str(cfg), "--out", str(out)]) == 0
    assert first == {p.name: p.read_bytes() for p in out.iterdir()}


def test_experiment_mismatch(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", experiment={"type": "eigen", "h": 2}, output_dir=str(tmp_path / "o"))
    assert main(["--quiet", "--config", str(cfg), "critical-length"]) == 2
    assert main(["--quiet", "--config", str(cfg), "eigen"]) == 0


def test_accel_check_inapplicable(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", output_dir=str(tmp_path / "o"))
    assert main(["--quiet", "--config", str(cfg), "accel-check"]) == 4


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "nlspread.lab", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("simulate", "eigen", "critical-length", "semiwave", "speeds", "dichotomy-scan", "accel-check", "vanishing-bound"):
        assert cmd in r.stdout
