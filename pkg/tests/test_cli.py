import subprocess
import sys

import pytest

from sadic import cli


def test_ok_and_summary(tmp_path, capsys):
    rc = cli.main(["rauzy-class", "--perm", "3,2,1", "--out-dir", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("rauzy-class") and "rauzy_class.json" in out


def test_config_error_exit_code(tmp_path, capsys):
    rc = cli.main(["spectral", "--omega-grid", "0.1:0", "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "omega_grid" in capsys.readouterr().err


def test_missing_seed_exit_code(tmp_path):
    assert cli.main(["lyapunov", "--seq", "iid:12,1|1,2", "--out-dir", str(tmp_path)]) == 2


def test_budget_exit_code(tmp_path, capsys):
    rc = cli.main(["ek-count", "--N", "20", "--delta", "0.2", "--branch-budget", "50", "--out-dir", str(tmp_path)])
    assert rc == 3
    assert "budget" in capsys.readouterr().err


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[cocycle]\nN = 5\n")
    cli.main(["cocycle", "--config", str(cfg), "--N", "7", "--out-dir", str(tmp_path / "o")])
    rows = (tmp_path / "o" / "cocycle.csv").read_text().splitlines()
    assert len([r for r in rows[1:] if not r.startswith("#")]) == 7


def test_fit_roundtrip(tmp_path):
    d = tmp_path / "s"
    assert cli.main(["spectral", "--omega-grid", "1.1", "--R-grid", "log:20:400:5", "--n-points", "6",
                     "--seed", "3", "--out-dir", str(d)]) == 0
    assert cli.main(["fit", "--table", str(d / "spectral.csv"), "--out-dir", str(tmp_path / "f")]) == 0
    a = (d / "fit.csv").read_text().splitlines()[:2]
    b = (tmp_path / "f" / "fit.csv").read_text().splitlines()[:2]
    assert a == b


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "sadic.cli", "good-word", "--perm", "2,1", "--out-dir", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        cli.main(["nope"])
