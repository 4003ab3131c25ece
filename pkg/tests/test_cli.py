import csv
import subprocess
import sys

import pytest

from ldpfair.cli import main
from ldpfair.mechanisms import optimize_theta


def write_config(tmp_path, extra=""):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(
        "synthetic: {n: 400, seed: 2}\nmechanisms: [SS]\nallocations: [uniform]\n"
        "epsilons: [1, 4]\nruns: 1\nclassifier: {epochs: 20}\noutput: out\n" + extra
    )
    return cfg


def test_theta(capsys):
    assert main(["theta", "--epsilon", "2"]) == 0
    assert float(capsys.readouterr().out) == optimize_theta(2.0)


def test_theta_rejects_zero(capsys):
    assert main(["theta", "--epsilon", "0"]) == 1
    assert "error" in capsys.readouterr().err


def test_run_writes_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path, "curves: true\n")
    assert main(["run", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    with (out / "metrics.csv").open() as fh:
        assert len(list(csv.DictReader(fh))) == 3
    assert (out / "summary.csv").exists() and (out / "curve_DI.csv").exists()
    assert "3 rows" in capsys.readouterr().out


def test_run_out_override(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "elsewhere")]) == 0
    assert (tmp_path / "elsewhere" / "metrics.csv").exists()


def test_validate(tmp_path, capsys):
    assert main(["validate", "--config", str(write_config(tmp_path))]) == 0
    out = capsys.readouterr().out
    assert "n=400" in out and "protected" in out and "1 runs x (1 + 2 cells) = 3 rows" in out


def test_synth_then_validate_csv(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path), "--n", "300", "--seed", "1"]) == 0
    cfg = tmp_path / "exp.yaml"
    cfg.write_text("dataset: synthetic.csv\nschema: synthetic_schema.yaml\n")
    assert main(["validate", "--config", str(cfg)]) == 0
    assert "n=300 (dropped 0)" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [
        ["validate", "--config", "/nonexistent.yaml"],
        ["run", "--config", "/nonexistent.yaml"],
    ],
)
def test_errors_exit_nonzero(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_bad_config_exits_nonzero(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("synthetic: {n: 100}\nepsilons: [-1]\n")
    assert main(["run", "--config", str(cfg)]) == 1


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "ldpfair", "theta", "--epsilon", "1"], capture_output=True, text=True)
    assert done.returncode == 0 and 0.5 < float(done.stdout) < 1
    done = subprocess.run([sys.executable, "-m", "ldpfair"], capture_output=True, text=True)
    assert done.returncode != 0
