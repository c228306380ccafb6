import subprocess
import sys

import pytest

from enkbf_dp.cli import EXIT_CONFIG, EXIT_OK, EXIT_TOLERANCE, main


def _kv(text):
    return dict(line.split(": ", 1) for line in text.strip().splitlines())


def test_roundtrip_command(tmp_path, capsys):
    assert main(["roundtrip", "--out", str(tmp_path)]) == EXIT_OK
    out = _kv(capsys.readouterr().out)
    assert out["passed"] == "true"
    resolved = _kv((tmp_path / "resolved_config.txt").read_text())
    assert resolved["study"] == "roundtrip" and "backend" in resolved


def test_flags_reach_resolved_config(tmp_path, capsys):
    args = ["contraction", "--out", str(tmp_path), "--seed", "4", "--jobs", "1", "--n", "1e4", "1e3",
            "--dim", "5", "--alpha", "1.5", "--dt", "0.02", "--particles", "32", "--kappa-const", "0.5",
            "--replicates", "2"]
    assert main(args) == EXIT_OK
    r = _kv((tmp_path / "resolved_config.txt").read_text())
    assert (r["seed"], r["D_override"], r["alpha"], r["dt"], r["J"], r["kappa_constant"]) == (
        "4", "5", "1.5", "0.02", "32", "0.5")
    assert r["n_list"] == "[1000.0, 10000.0]"
    assert (tmp_path / "contraction.csv").exists()
    assert "fitted_slope" in _kv(capsys.readouterr().out)


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("J: 64\nreplicates: 2\nn_list: [1000, 10000]\nseed: 9\n")
    assert main(["coverage", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "o")]) == EXIT_OK
    r = _kv((tmp_path / "o" / "resolved_config.txt").read_text())
    assert r["J"] == "64" and r["seed"] == "3"


def test_invalid_configuration_exit_code(tmp_path, capsys):
    assert main(["contraction", "--alpha", "-1", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["contraction", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["contraction", "--particles", "many"])
    assert exc.value.code == EXIT_CONFIG


def test_tolerance_breach_exit_code(tmp_path, capsys):
    # a 2-particle ensemble cannot reproduce the posterior variances
    assert main(["oracle", "--particles", "2", "--out", str(tmp_path)]) == EXIT_TOLERANCE
    assert _kv(capsys.readouterr().out)["passed"] == "false"


def test_console_script_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "enkbf_dp.cli", "roundtrip", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "refinement_slope: " in proc.stdout
