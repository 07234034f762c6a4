import json

import numpy as np
import pytest

from bathy.elliptic import LateralTrace
from bathy.exceptions import ConfigError
from bathy.geometry import Grid1D, ScalarField
from bathy.report_service import ReportService, read_measurement, read_rows, read_trajectory, write_trajectory
from bathy.schemas import InversionReport
from bathy.waves import MeasurementTuple, WaveState


@pytest.fixture
def reports(tmp_path):
    return ReportService(str(tmp_path / "out"))


def test_json_report_is_sorted(reports):
    report = InversionReport(converged=True, iterations=3, misfit_history=[1.0, 0.5], l1_error=None,
                             identifiable=True, stop_reason="ftol")
    path = reports.write_json("inversion.json", report)
    payload = json.loads(path.read_text())
    assert list(payload) == sorted(payload)
    assert payload["stop_reason"] == "ftol"
    assert not [p for p in path.parent.iterdir() if p.name.startswith(".")]


def test_rows_keep_full_precision(reports):
    path = reports.write_rows("rows.csv", ("x", "label"), [(1.0 / 3.0, "a")])
    (row,) = read_rows(str(path))
    assert float(row["x"]) == 1.0 / 3.0
    assert row["label"] == "a"


def test_measurement_file(reports):
    grid = Grid1D(0.0, 1.0, 5)
    m = MeasurementTuple(
        ScalarField.constant(grid, 0.0), ScalarField(grid, grid.nodes), ScalarField(grid, grid.nodes ** 2),
        -1.0, -0.9, 0.5, LateralTrace.constant(3, 0.0, 1.0),
    )
    loaded = read_measurement(str(reports.write_measurement("measurement.json", m)))
    assert loaded.grid == grid
    np.testing.assert_array_equal(loaded.psi.values, m.psi.values)
    np.testing.assert_array_equal(loaded.theta.right, m.theta.right)
    assert (loaded.b_left, loaded.b_right, loaded.t0) == (-1.0, -0.9, 0.5)


def test_missing_measurement(tmp_path):
    with pytest.raises(ConfigError):
        read_measurement(str(tmp_path / "absent.json"))


def test_trajectory_keeps_every_nth_and_last(reports):
    grid = Grid1D(0.0, 1.0, 4, periodic=True)
    states = [
        WaveState(ScalarField(grid, 0.01 * k), ScalarField(grid, grid.nodes * k), 0.1 * k) for k in range(5)
    ]
    index = write_trajectory(reports, states, save_every=3)
    loaded = read_trajectory(str(index))
    assert [s.t for s in loaded] == pytest.approx([0.0, 0.3, 0.4])
    assert loaded[0].grid.periodic
    np.testing.assert_allclose(loaded[-1].psi.values, states[-1].psi.values)
