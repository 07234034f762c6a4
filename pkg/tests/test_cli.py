import csv
import json

import pytest
from click.testing import CliRunner

from bathy.main import cli

pytestmark = pytest.mark.cli

SMALL_GRID = """
[grid]
n_nodes = 17
n_sigma = 9
"""


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def write_config(tmp_path):
    def write(text):
        path = tmp_path / "experiment.toml"
        path.write_text(text)
        return str(path)
    return write


def invoke(runner, tmp_path, config, *args):
    return runner.invoke(cli, ["--config", config, "--out", str(tmp_path / "out"), *args])


def test_unknown_key_is_a_config_error(runner, tmp_path, write_config):
    result = invoke(runner, tmp_path, write_config("[grid]\nnodes = 5\n"), "solve")
    assert result.exit_code == 2
    assert "grid.nodes" in result.output


def test_invalid_value_names_the_key(runner, tmp_path, write_config):
    result = invoke(runner, tmp_path, write_config("[certificate]\ns = 0.7\n"), "certify")
    assert result.exit_code == 2
    assert "certificate.s" in result.output


def test_bad_expression(runner, tmp_path, write_config):
    result = invoke(runner, tmp_path, write_config(SMALL_GRID + "[profiles]\nbottom = \"-1 + foo(X)\"\n"), "solve")
    assert result.exit_code == 2
    assert "foo" in result.output


def test_solve_writes_reports(runner, tmp_path, write_config):
    result = invoke(runner, tmp_path, write_config(SMALL_GRID), "solve")
    assert result.exit_code == 0, result.output
    out = tmp_path / "out"
    summary = json.loads((out / "solve.json").read_text())
    assert summary["energy"] > 0
    assert summary["diagnostics"]["grid"] == {"n_nodes": 17, "n_sigma": 9}
    with open(out / "potential.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 17 * 9


def test_shallow_bottom_is_a_solver_error(runner, tmp_path, write_config):
    config = write_config(SMALL_GRID + "[profiles]\nbottom = \"-0.1\"\n")
    result = invoke(runner, tmp_path, config, "solve")
    assert result.exit_code == 3


def test_identical_pair_exit_code(runner, tmp_path, write_config):
    result = invoke(runner, tmp_path, write_config(SMALL_GRID), "certify")
    assert result.exit_code == 4
    assert "coincide" in result.output


def test_certify_and_run_ledger(runner, tmp_path, write_config):
    config = write_config(SMALL_GRID + """
[profiles]
bottom0 = "-1 + 0.2*exp(-50*(X - 0.5)^2)"
potential = "X"
""")
    result = invoke(runner, tmp_path, config, "certify")
    assert result.exit_code in (0, 5), result.output
    report = json.loads((tmp_path / "out" / "certificate.json").read_text())
    assert report["verdict"] in ("HOLDS", "NON_INFORMATIVE", "VIOLATED")

    listing = runner.invoke(cli, ["runs", "--command", "certify", "--limit", "1"])
    assert listing.exit_code == 0
    assert "certify" in listing.output
    assert f"exit={result.exit_code}" in listing.output


def test_sweep_rows(runner, tmp_path, write_config):
    config = write_config(SMALL_GRID + """
[profiles]
potential = "cos(pi*X)"

[certificate]
epsilons = [0.1, 0.01]
""")
    result = invoke(runner, tmp_path, config, "sweep")
    assert result.exit_code == 0, result.output
    with open(tmp_path / "out" / "sweep.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert [float(r["epsilon"]) for r in rows] == [0.1, 0.01]
    # both configurations share the bottom
    assert all(float(r["l1_distance"]) == 0.0 for r in rows if not r["error"])


def test_sweep_over_different_bottoms(runner, tmp_path, write_config):
    config = write_config(SMALL_GRID + """
[profiles]
potential = "cos(pi*X)"
bottom0 = "-1 - 0.0001*exp(-50*(X - 0.5)^2)"

[certificate]
epsilons = [0.001, 0.1, 0.01]
""")
    result = invoke(runner, tmp_path, config, "sweep")
    assert result.exit_code == 0, result.output
    with open(tmp_path / "out" / "sweep.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert [r["error"] for r in rows] == ["", "", ""]
    assert [float(r["epsilon"]) for r in rows] == [0.1, 0.01, 0.001]
    assert all(float(r["l1_distance"]) > 0.0 for r in rows)
    assert {r["verdict"] for r in rows} <= {"HOLDS", "NON_INFORMATIVE"}
    rhs = [float(r["rhs"]) for r in rows]
    assert all(later <= earlier for earlier, later in zip(rhs, rhs[1:]))


def test_thin_bump_is_not_certified(runner, tmp_path, write_config):
    config = write_config("""
[grid]
n_nodes = 33
n_sigma = 17

[profiles]
bottom0 = "-1 + 0.008*exp(-50*(X - 0.5)^2)"
potential = "cos(pi*X)"
potential0 = "cos(pi*X) + 0.1*sin(2*pi*X)"
""")
    result = invoke(runner, tmp_path, config, "certify")
    assert result.exit_code == 5, result.output
    report = json.loads((tmp_path / "out" / "certificate.json").read_text())
    assert report["covered"] is False
    assert report["verdict"] == "NON_INFORMATIVE"
    assert any("is not fat" in note for note in report["notes"])


def test_simulate_then_measure(runner, tmp_path, write_config):
    config = write_config(SMALL_GRID + """
[profiles]
initial_surface = "0.001*cos(2*pi*X)"

[time]
dt = 0.01
t_end = 0.02

[output]
plots = false
""")
    result = invoke(runner, tmp_path, config, "simulate")
    assert result.exit_code == 0, result.output
    out = tmp_path / "out"
    index = json.loads((out / "trajectory" / "index.json").read_text())
    assert [s["step"] for s in index["states"]] == [0, 1, 2]
    assert not (out / "trajectory" / "final_state.svg").exists()

    result = invoke(runner, tmp_path, config, "measure")
    assert result.exit_code == 0, result.output
    measurement = json.loads((out / "measurement.json").read_text())
    assert measurement["grid"]["n_nodes"] == 17
    assert measurement["t0"] == pytest.approx(0.02)

    mismatched = write_config("[grid]\nn_nodes = 33\nn_sigma = 9\n")
    result = invoke(runner, tmp_path, mismatched, "invert", "--measurement", str(out / "measurement.json"))
    assert result.exit_code == 2


def test_invert_on_synthetic_data(runner, tmp_path, write_config):
    config = write_config(SMALL_GRID + """
[inversion]
truth = "-1 + 0.1*exp(-50*(X - 0.5)^2)"
max_iters = 3
""")
    result = invoke(runner, tmp_path, config, "invert")
    assert result.exit_code == 0, result.output
    out = tmp_path / "out"
    report = json.loads((out / "inversion.json").read_text())
    assert report["iterations"] <= 3
    assert report["identifiable"]
    assert report["l1_error"] is not None
    assert (out / "b_est.csv").exists()


@pytest.mark.slow
def test_invert_writes_noise_sweep(runner, tmp_path, write_config):
    config = write_config(SMALL_GRID + """
[profiles]
potential = "10*X"

[inversion]
truth = "-1 + 0.1*exp(-50*(X - 0.5)^2)"
max_iters = 20
noise_levels = [1e-2, 1e-4, 1e-3]
""")
    result = invoke(runner, tmp_path, config, "invert")
    assert result.exit_code == 0, result.output
    with open(tmp_path / "out" / "noise_sweep.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert [float(r["level"]) for r in rows] == [1e-4, 1e-3, 1e-2]
    assert all(float(r["l1_error"]) >= 0.0 for r in rows)
    assert all(int(r["iterations"]) <= 20 for r in rows)


def test_invert_needs_truth_or_measurement(runner, tmp_path, write_config):
    result = invoke(runner, tmp_path, write_config(SMALL_GRID), "invert")
    assert result.exit_code == 2


def test_infeasible_start(runner, tmp_path, write_config):
    config = write_config(SMALL_GRID + """
[inversion]
truth = "-1"
init = "-0.05"
""")
    result = invoke(runner, tmp_path, config, "invert")
    assert result.exit_code == 6


@pytest.mark.slow
def test_verify_table(runner, tmp_path, write_config):
    config = write_config("""
[grid]
n_nodes = 33
n_sigma = 17

[verify]
pairs = 4
configurations = 3
gradient_nodes = 3
""")
    result = invoke(runner, tmp_path, config, "verify")
    with open(tmp_path / "out" / "verify.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    checks = {r["check"] for r in rows}
    assert {"adjoint gradient vs finite differences", "Green identity", "surface trace identities"} <= checks
    assert [r["check"] for r in rows if r["status"] != "PASS"] == []
    assert result.exit_code == 0, result.output
