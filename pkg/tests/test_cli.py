import csv
import json

import pytest

from mergesplit.cli import main


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_profile_writes_artifacts(tmp_path, capsys):
    assert run(tmp_path, "profile", "--alpha", "0.5", "--check") == 0
    doc = json.loads((tmp_path / "profile_alpha0.5.json").read_text())
    assert doc["schema_version"] == "1"
    assert round(doc["params"]["beta"], 6) == 0.666667
    with open(tmp_path / "profile_alpha0.5.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["z", "u", "one_minus_u", "v"]
    assert "beta=0.666667" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [["profile", "--alpha", "1.5"], ["modeld", "--n", "0"], ["evolve", "--dt", "0.5"]])
def test_invalid_parameters_exit_2(tmp_path, argv):
    assert run(tmp_path, *argv) == 2
    failure = json.loads((tmp_path / f"{argv[0]}_failure.json").read_text())
    assert failure["failure"] == "validation"


def test_runs_are_byte_identical(tmp_path):
    names = ("profile_alpha0.3.json", "profile_alpha0.3.csv")
    assert run(tmp_path, "profile", "--alpha", "0.3") == 0
    first = [(tmp_path / n).read_bytes() for n in names]
    assert run(tmp_path, "profile", "--alpha", "0.3") == 0
    assert [(tmp_path / n).read_bytes() for n in names] == first


def test_flag_overrides_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# profile run\nalpha = 0.4\nlambda = 2.0\n")
    assert run(tmp_path, "profile", "--config", str(cfg), "--alpha", "0.6") == 0
    doc = json.loads((tmp_path / "profile_alpha0.6.json").read_text())
    assert doc["config"]["alpha"] == 0.6
    assert doc["config"]["lambda"] == 2.0


def test_config_rejects_foreign_keys(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 10\n")
    assert run(tmp_path, "profile", "--config", str(cfg)) == 2


def test_evolve_short_run(tmp_path):
    argv = ["evolve", "--t-end", "1", "--grid-min", "1e-10", "--grid-max", "1e6", "--per-decade", "20"]
    assert run(tmp_path, *argv) == 0
    doc = json.loads((tmp_path / "evolve.json").read_text())
    assert doc["kind"] == "evolve"
    assert (tmp_path / "evolve_final.csv").exists()


def test_modeld_short_run(tmp_path):
    assert run(tmp_path, "modeld", "--n", "2000", "--t-end", "0.5") == 0
    doc = json.loads((tmp_path / "modeld.json").read_text())
    assert doc["kind"] == "modeld"


def test_invert_writes_both_routes(tmp_path):
    assert run(tmp_path, "invert", "--alpha", "0.5", "--per-decade", "5") == 0
    with open(tmp_path / "density_alpha0.5.csv", newline="") as fh:
        routes = {row[2] for row in list(csv.reader(fh))[1:]}
    assert routes == {"inversion", "subordination"}


def test_quick_check(tmp_path, capsys):
    assert run(tmp_path, "check", "--quick") == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith(("criterion", "check"))]
    assert len(lines) == 6 and all(" PASS " in l for l in lines)
    assert "logistic m0" in lines[0]
    doc = json.loads((tmp_path / "acceptance.json").read_text())
    assert all("runtime" not in r for r in doc["results"])
