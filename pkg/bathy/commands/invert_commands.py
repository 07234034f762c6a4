import logging
from typing import Optional, Tuple

import click

from bathy import plots, schemas
from bathy.commands.common import (
    CliState,
    inversion_options,
    pass_state,
    profile,
    run_command,
    solver_settings,
    wall_trace,
    window_grid,
)
from bathy.elliptic import LateralTrace, dno
from bathy.exceptions import ConfigError, GridMismatch
from bathy.geometry import ScalarField, build_domain
from bathy.inversion import InversionResult, invert, noise_sweep
from bathy.report_service import read_measurement
from bathy.waves import MeasurementTuple

logger = logging.getLogger(__name__)

router = click.Group()


def synthetic_measurement(config: schemas.ExperimentConfig) -> Tuple[MeasurementTuple, ScalarField]:
    """Noiseless data G(zeta, b_true) psi from a window solve with the [inversion] truth."""
    if config.inversion.truth is None:
        raise ConfigError("inversion.truth is required when no measurement file is given")
    grid = window_grid(config)
    p = config.profiles
    b_true = profile(config.inversion.truth, grid)
    zeta = profile(p.surface, grid)
    psi = profile(p.potential, grid)
    n_sigma = config.grid.n_sigma
    theta = wall_trace(p.wall, b_true, zeta, n_sigma)
    if theta is None:
        theta = LateralTrace.constant(n_sigma, psi.values[0], psi.values[-1])
    data = dno(build_domain(b_true, zeta, config.inversion.depth_floor), psi, theta, n_sigma, solver_settings(config))
    m = MeasurementTuple(zeta, data, psi, float(b_true.values[0]), float(b_true.values[-1]), 0.0, theta)
    return m, b_true


def run_noise_job(m: MeasurementTuple, b_init: ScalarField, b_true: Optional[ScalarField], opts, level: float, seed: int) -> InversionResult:
    """One level of the noise sweep; every level redraws the same noise from seed."""
    return noise_sweep(m, b_init, opts, [level], seed, b_true)[0]


@router.command("invert")
@click.option("--measurement", "measurement_path", type=click.Path(), default=None,
              help="Measurement JSON from the measure command; synthesized from [inversion] truth otherwise.")
@pass_state
def invert_command(state: CliState, measurement_path: Optional[str]):
    """
    Reconstruct the bottom from one measurement.

    Writes inversion.json, b_est.csv and convergence.svg; with
    inversion.noise_levels set, also noise_sweep.csv. Exits 3 on solver
    failure and 6 on an infeasible initial bottom.
    """
    with run_command(state, "invert"):
        config = state.config
        opts = inversion_options(config)
        if measurement_path is None:
            m, b_true = synthetic_measurement(config)
        else:
            m = read_measurement(measurement_path)
            if m.grid != window_grid(config):
                raise GridMismatch("measurement grid differs from the [grid] section")
            b_true = None if config.inversion.truth is None else profile(config.inversion.truth, m.grid)
        b_init = profile(config.inversion.init, m.grid)
        result = invert(m, None, b_init, opts, b_true)
        report = schemas.InversionReport(**result.to_report())

        reports = state.reports
        reports.write_json("inversion.json", report)
        reports.write_field("b_est.csv", result.b_est)
        figure = plots.convergence_figure(result.misfit_history)
        reports.write_figure("convergence.svg", figure)
        plots.close(figure)
        if not result.identifiable:
            click.echo("warning: psi is constant on the window, the bottom is not identifiable", err=True)

        levels = sorted(config.inversion.noise_levels)
        if levels:
            jobs = [(m, b_init, b_true, opts, level, state.effective_seed) for level in levels]
            noisy = state.scheduler.map(run_noise_job, jobs)
            reports.write_rows(
                "noise_sweep.csv", ("level", "l1_error", "iterations", "converged"),
                ([level, r.l1_error_vs_truth if r.l1_error_vs_truth is not None else "", r.iterations, r.converged]
                 for level, r in zip(levels, noisy)),
            )
        click.echo(
            f"{result.stop_reason} after {result.iterations} iterations, misfit {result.misfit_history[-1]:.6e}"
            + ("" if result.l1_error_vs_truth is None else f", L1 error {result.l1_error_vs_truth:.6g}")
        )
