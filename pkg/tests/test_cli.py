import json
import math
import subprocess
import sys

import pytest

from cknlab.cli import emit_table, main
from cknlab.params import ab_coordinates, derived_constants, make_params

SWEEP_COLS = ["d", "n", "alpha", "lambda", "m", "err_estimate", "status"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_mass_command(capsys):
    code, out, _ = run(capsys, "mass", "--d", "3", "--n", "3", "--alpha", "1", "--lambda", "0.75")
    assert code == 0
    doc = json.loads(out)
    assert doc["m"] == pytest.approx(-1 / (8 * math.pi), abs=1e-8)
    cfg = doc["config"]
    assert cfg["lambda"] == 0.75
    assert {"a", "b", "p", "kappa"} <= set(cfg)


def test_lambda_star_command(capsys):
    code, out, _ = run(capsys, "lambda-star", "--d", "3", "--n", "3", "--alpha", "1")
    assert code == 0
    assert json.loads(out)["lambda_star"] == pytest.approx(1.0, abs=1e-6)


def test_divergent_mass_exit_code(capsys):
    code, out, err = run(capsys, "mass", "--d", "3", "--n", "4", "--alpha", "1", "--lambda", "1")
    assert code == 3
    assert out == ""
    assert "divergent: requires n<4" in err


@pytest.mark.parametrize("argv", [
    ["mass", "--lambda", "2"],
    ["constants", "--n", "2.5"],
    ["spectral-gap", "--mesh", "16"],
])
def test_domain_exit_code(capsys, argv):
    assert run(capsys, *argv)[0] == 2


@pytest.mark.parametrize("argv", [[], ["bogus"], ["mass"], ["mass", "--lambda", "x"],
                                  ["constants", "--format", "xml"]])
def test_usage_exit_code(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 64
    assert "usage" in err


def test_io_exit_code(capsys, tmp_path):
    target = tmp_path / "missing" / "out.csv"
    code, _, err = run(capsys, "constants", "--out", str(target))
    assert code == 4
    assert "cannot write" in err


def test_out_file(capsys, tmp_path):
    target = tmp_path / "c.json"
    code, out, _ = run(capsys, "constants", "--n", "3.5", "--alpha", "0.8", "--out", str(target))
    assert code == 0 and out == ""
    doc = json.loads(target.read_text())
    assert doc["c_rad"] == derived_constants(make_params(3, 3.5, 0.8)).c_rad


def test_config_echo(capsys):
    code, out, _ = run(capsys, "constants", "--d", "3", "--n", str(10 / 3), "--alpha", "0.375")
    cfg = json.loads(out)["config"]
    a, b = ab_coordinates(make_params(3, 10 / 3, 0.375))
    assert cfg["a"] == a and cfg["b"] == b
    assert cfg["kappa"] == derived_constants(make_params(3, 10 / 3, 0.375)).kappa


def test_sweep_csv(capsys):
    code, out, _ = run(capsys, "sweep", "--n-grid", "3.5,3.8,4.2", "--lambda", "1")
    assert code == 0
    lines = out.split("\n")
    assert out.endswith("\n")
    assert lines[0] == ",".join(SWEEP_COLS)
    assert len(lines) == 5          # header, three rows, trailing newline
    assert lines[3].endswith(",divergent")
    m = float(lines[1].split(",")[4])
    assert len(lines[1].split(",")[4].replace("-", "").replace(".", "").lstrip("0")) >= 16
    assert m > 0


def test_sweep_json_non_finite_is_null(capsys):
    code, out, _ = run(capsys, "sweep", "--n-grid", "4.2", "--lambda", "1", "--format", "json")
    doc = json.loads(out)
    assert set(doc) == {"config", "rows"}
    assert doc["rows"][0]["m"] is None
    assert doc["rows"][0]["status"] == "divergent"


def test_emit_table_shapes(tmp_path):
    assert emit_table([], SWEEP_COLS) == ",".join(SWEEP_COLS) + "\n"
    rows = [[3, 3.5, 1.0, 1.0, 0.1, 0.0, "ok"]] * 3
    assert len(emit_table(rows, SWEEP_COLS).splitlines()) == 4
    doc = json.loads(emit_table(rows, SWEEP_COLS, "json", {"d": 3}))
    assert set(doc) == {"config", "rows"}
    path = tmp_path / "t.csv"
    text = emit_table(rows, SWEEP_COLS, path=path)
    assert path.read_text() == text


def test_csv_uses_seventeen_digits():
    text = emit_table([[0.1, 1 / 3]], ["x", "y"])
    assert text.splitlines()[1] == "0.10000000000000001,0.33333333333333331"


def test_json_round_trips_floats():
    doc = json.loads(emit_table([[0.1, 1 / 3]], ["x", "y"], "json"))
    assert doc["rows"][0] == {"x": 0.1, "y": 1 / 3}


@pytest.mark.parametrize("argv", [
    ["verify-estimates", "--n", "3.5", "--alpha", "0.8", "--lambda", "0.5", "--samples", "12",
     "--k-max", "8", "--seed", "4"],
    ["green", "--n", "3.5", "--alpha", "0.8", "--lambda", "0.5", "--points", "20"],
    ["deficit", "--n", "4.5", "--eps", "0.2,0.1"],
])
def test_output_is_deterministic(capsys, argv):
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first[0] == 0
    assert first[1] == second[1]


def test_green_profile_columns(capsys):
    code, out, _ = run(capsys, "green", "--lambda", "0.0", "--points", "10")
    lines = out.splitlines()
    assert lines[0] == "rho,G,phi,chi"
    rho, G, phi, chi = map(float, lines[1].split(","))
    assert G == pytest.approx(phi - 1 / (4 * math.pi), rel=1e-8)
    assert chi == pytest.approx(-1 / (4 * math.pi), rel=1e-8)


def test_two_point_command(capsys):
    code, out, _ = run(capsys, "two-point", "--domain", "cone", "--rho-x", "0.3", "--rho-y", "0.8",
                       "--cos-theta", "1")
    assert code == 0
    assert json.loads(out)["G"] == pytest.approx(1 / (2 * math.pi), rel=1e-10)


def test_sign_experiment_and_gap_commands(capsys):
    code, out, _ = run(capsys, "sign-experiment", "--lambda", "0.75", "--eps", "0.05,0.025")
    assert code == 0
    assert out.splitlines()[0] == "eps,quotient,gap"
    code, out, _ = run(capsys, "spectral-gap", "--mesh", "128", "--format", "json")
    doc = json.loads(out)
    assert doc["rows"][0]["value"] >= 1.0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cknlab", "constants"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["p"] == 6.0
