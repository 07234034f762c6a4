"""
Shared plumbing of the commands: config loading, run ledger bookkeeping and
the builders that turn config sections into domain objects.
"""
from __future__ import annotations

import contextlib
import hashlib
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterator, Optional, Tuple

import click
import numpy as np
from pydantic import ValidationError
from sqlalchemy.orm import Session

from bathy import expressions, models, schemas
from bathy.certificate import ConfigConstants
from bathy.database import SessionLocal
from bathy.elliptic import LateralTrace, SolverSettings
from bathy.exceptions import BathyError, ConfigError
from bathy.geometry import Grid1D, ScalarField
from bathy.inversion import InversionOptions
from bathy.report_service import ReportService
from bathy.scheduler import SweepScheduler
from bathy.waves import SimConfig

logger = logging.getLogger(__name__)


def load_config(path: Optional[str]) -> schemas.ExperimentConfig:
    """
    Read and validate a TOML experiment config; no path means all defaults.

    Raises:
        ConfigError: If the file is unreadable, is not TOML, or fails
            validation. The message names the offending key.
    """
    if path is None:
        return schemas.ExperimentConfig()
    try:
        data = tomllib.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config '{path}' is not valid TOML: {exc}") from exc
    try:
        return schemas.ExperimentConfig.parse_obj(data)
    except ValidationError as exc:
        error = exc.errors()[0]
        key = ".".join(str(part) for part in error["loc"])
        raise ConfigError(f"{key}: {error['msg']}") from exc


@dataclass
class CliState:
    """
    Global options of one invocation, stored on the click context.

    Attributes:
        config_path (str | None): TOML config file.
        out (str | None): Output directory override.
        seed (int | None): Seed of every random stream.
        threads (int): Worker processes of the sweeps.
    """
    config_path: Optional[str] = None
    out: Optional[str] = None
    seed: Optional[int] = None
    threads: int = 1
    _config: Optional[schemas.ExperimentConfig] = field(default=None, repr=False)

    @property
    def config(self) -> schemas.ExperimentConfig:
        if self._config is None:
            self._config = load_config(self.config_path)
        return self._config

    @property
    def reports(self) -> ReportService:
        return ReportService(self.out or self.config.output.directory, plots=self.config.output.plots)

    @property
    def scheduler(self) -> SweepScheduler:
        return SweepScheduler(self.threads)

    @property
    def effective_seed(self) -> int:
        return 0 if self.seed is None else self.seed

    def digest(self) -> str:
        return hashlib.sha256(self.config.json(sort_keys=True).encode()).hexdigest()


pass_state = click.make_pass_decorator(CliState, ensure=True)


def _finish(db: Session, run: models.Run, status: str, exit_code: int, detail: Optional[str] = None) -> None:
    run.status = status
    run.exit_code = exit_code
    run.detail = detail
    run.finished_at = datetime.utcnow()
    db.commit()


@contextlib.contextmanager
def run_command(state: CliState, command: str) -> Iterator[Tuple[Session, models.Run]]:
    """
    Record a command in the run ledger and map domain errors to exit codes.

    Yields:
        tuple: (session, run) so the command can attach sweep rows.
    """
    db = SessionLocal()
    run = models.Run(command=command, seed=state.seed, output_dir=state.out)
    db.add(run)
    db.commit()
    db.refresh(run)
    try:
        run.config_digest = state.digest()
        run.output_dir = str(state.reports.directory)
        yield db, run
    except BathyError as exc:
        logger.error("%s failed: %s", command, exc.detail)
        _finish(db, run, "failed", exc.exit_code, exc.detail)
        click.echo(f"error: {exc.detail}", err=True)
        db.close()
        click.get_current_context().exit(exc.exit_code)
    else:
        _finish(db, run, "ok", 0)
        db.close()


def window_grid(config: schemas.ExperimentConfig) -> Grid1D:
    return Grid1D(config.grid.a1, config.grid.a2, config.grid.n_nodes)


def solver_settings(config: schemas.ExperimentConfig) -> SolverSettings:
    return SolverSettings(method=config.grid.solver, tol=config.grid.solver_tol)


def profile(text: str, grid: Grid1D, eps: float = 0.0) -> ScalarField:
    return expressions.profile_field(text, grid, eps)


def wall_trace(
    text: Optional[str], bottom: ScalarField, surface: ScalarField, n_sigma: int, eps: float = 0.0
) -> Optional[LateralTrace]:
    """Wall data from an expression in (X, Y) on the sigma layers of both walls; None keeps the default."""
    if text is None:
        return None
    grid = bottom.grid
    sigma = np.linspace(0.0, 1.0, n_sigma)
    sides = []
    for column in (0, grid.n_nodes - 1):
        x = grid.nodes[column]
        y = bottom.values[column] + sigma * (surface.values[column] - bottom.values[column])
        sides.append(expressions.evaluate(text, np.full(n_sigma, x), y, eps))
    return LateralTrace(*sides)


def constants(config: schemas.ExperimentConfig) -> ConfigConstants:
    return ConfigConstants(s=config.certificate.s, big_c=config.certificate.big_c, small_c=config.certificate.small_c)


def inversion_options(config: schemas.ExperimentConfig) -> InversionOptions:
    section = config.inversion
    return InversionOptions(
        alpha_reg=section.alpha_reg,
        max_iters=section.max_iters,
        grad_tol=section.grad_tol,
        ftol=section.ftol,
        step_init=section.step_init,
        fd_step=section.fd_step,
        depth_floor=section.depth_floor,
        memory=section.memory,
        n_sigma=config.grid.n_sigma,
        solver=solver_settings(config),
    )


def sim_config(config: schemas.ExperimentConfig) -> SimConfig:
    return SimConfig(
        dt=config.time.dt,
        t_end=config.time.t_end,
        g=config.physics.g,
        h0=config.physics.h0,
        mother_domain_factor=config.window.mother_domain_factor,
        n_sigma=config.grid.n_sigma,
        solver=solver_settings(config),
    )


def echo_json(payload) -> None:
    click.echo(json.dumps(payload, sort_keys=True, indent=2))
