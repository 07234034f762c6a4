import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel

from bathy.elliptic import LateralTrace, PotentialField
from bathy.exceptions import ConfigError
from bathy.geometry import Grid1D, ScalarField
from bathy.waves import MeasurementTuple, WaveState

# Load environment variables from a .env file
load_dotenv()

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "{:.17g}"


class ReportService:
    """
    Writes every artifact of a run into one output directory.

    Each file is written to a temporary sibling first, flushed to disk and then
    renamed over the target, so an interrupted run never leaves a truncated report.

    Attributes:
        directory (Path): Output directory; created on first use.
        plots (bool): False skips every SVG figure.
    """
    def __init__(self, directory: Optional[str] = None, plots: bool = True):
        """
        Initialize the ReportService.

        Args:
            directory (str, optional): Output directory. Falls back to the
                BATHY_OUTPUT_DIR environment variable, then to ./bathy_out.
            plots (bool): Whether figures are written at all.
        """
        self.directory = Path(directory or os.getenv("BATHY_OUTPUT_DIR", "bathy_out"))
        self.plots = plots

    def path(self, name: str) -> Path:
        return self.directory / name

    def write_bytes(self, name: str, payload: bytes) -> Path:
        """
        Atomically write a file inside the output directory.

        Args:
            name (str): File name relative to the directory.
            payload (bytes): Content.

        Returns:
            Path: The final path.
        """
        target = self.path(name)
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(payload)
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        logger.debug("wrote %s (%d bytes)", target, len(payload))
        return target

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def write_json(self, name: str, payload) -> Path:
        if isinstance(payload, BaseModel):
            payload = json.loads(payload.json())
        return self.write_text(name, json.dumps(payload, sort_keys=True, indent=2) + "\n")

    def write_rows(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        """CSV with floats at 17 significant digits."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([FLOAT_FORMAT.format(v) if isinstance(v, (float, np.floating)) else v for v in row])
        return self.write_text(name, buffer.getvalue())

    def write_field(self, name: str, field: ScalarField) -> Path:
        return self.write_rows(name, ("x", "value"), zip(field.grid.nodes.tolist(), field.values.tolist()))

    def write_potential(self, name: str, phi: PotentialField) -> Path:
        return self.write_rows(name, ("x", "sigma", "y", "phi"), ((float(v) for v in row) for row in phi.rows()))

    def write_figure(self, name: str, figure) -> Optional[Path]:
        if not self.plots:
            return None
        buffer = io.BytesIO()
        figure.savefig(buffer, format="svg")
        return self.write_bytes(name, buffer.getvalue())

    def write_measurement(self, name: str, m: MeasurementTuple) -> Path:
        grid = m.grid
        payload = {
            "grid": {"a1": grid.a1, "a2": grid.a2, "n_nodes": grid.n_nodes},
            "t0": m.t0,
            "zeta": m.zeta.values.tolist(),
            "dt_zeta": m.dt_zeta.values.tolist(),
            "psi": m.psi.values.tolist(),
            "b_left": m.b_left,
            "b_right": m.b_right,
            "theta": None if m.theta is None else {"left": m.theta.left.tolist(), "right": m.theta.right.tolist()},
        }
        return self.write_json(name, payload)


def read_measurement(path: str) -> MeasurementTuple:
    """
    Load a measurement written by ReportService.write_measurement.

    Raises:
        ConfigError: If the file is missing or malformed.
    """
    try:
        payload = json.loads(Path(path).read_text())
        grid = Grid1D(float(payload["grid"]["a1"]), float(payload["grid"]["a2"]), int(payload["grid"]["n_nodes"]))
        theta = payload.get("theta")
        return MeasurementTuple(
            zeta=ScalarField(grid, np.array(payload["zeta"])),
            dt_zeta=ScalarField(grid, np.array(payload["dt_zeta"])),
            psi=ScalarField(grid, np.array(payload["psi"])),
            b_left=float(payload["b_left"]),
            b_right=float(payload["b_right"]),
            t0=float(payload["t0"]),
            theta=None if theta is None else LateralTrace(np.array(theta["left"]), np.array(theta["right"])),
        )
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot read measurement '{path}': {exc}") from exc


def read_rows(path: str) -> List[dict]:
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def write_trajectory(service: ReportService, trajectory, save_every: int = 1) -> Path:
    """
    Write every save_every-th state as trajectory/state_NNNNN.csv plus an index JSON.

    Returns:
        Path: The index file.
    """
    grid = trajectory[0].grid
    states = []
    for n, state in enumerate(trajectory):
        if n % save_every and n != len(trajectory) - 1:
            continue
        name = f"trajectory/state_{n:05d}.csv"
        service.write_rows(
            name, ("x", "zeta", "psi"),
            zip(grid.nodes.tolist(), state.zeta.values.tolist(), state.psi.values.tolist()),
        )
        states.append({"step": n, "t": state.t, "file": name})
    index = {
        "grid": {"a1": grid.a1, "a2": grid.a2, "n_nodes": grid.n_nodes, "periodic": grid.periodic},
        "states": states,
    }
    return service.write_json("trajectory/index.json", index)


def read_trajectory(index_path: str) -> list:
    """
    Load the states listed in a trajectory index.

    Raises:
        ConfigError: If the index or a state file is missing or malformed.
    """
    root = Path(index_path).parent.parent
    try:
        index = json.loads(Path(index_path).read_text())
        layout = index["grid"]
        grid = Grid1D(float(layout["a1"]), float(layout["a2"]), int(layout["n_nodes"]), bool(layout["periodic"]))
        trajectory = []
        for entry in index["states"]:
            rows = read_rows(str(root / entry["file"]))
            zeta = np.array([float(r["zeta"]) for r in rows])
            psi = np.array([float(r["psi"]) for r in rows])
            trajectory.append(WaveState(ScalarField(grid, zeta), ScalarField(grid, psi), float(entry["t"])))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot read trajectory '{index_path}': {exc}") from exc
    if not trajectory:
        raise ConfigError(f"trajectory '{index_path}' lists no states")
    return trajectory
