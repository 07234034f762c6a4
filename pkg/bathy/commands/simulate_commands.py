from typing import Optional

import click

from bathy import plots
from bathy.commands.common import CliState, pass_state, profile, run_command, sim_config, window_grid
from bathy.report_service import read_trajectory, write_trajectory
from bathy.waves import WaveState, measure, mother_grid, simulate

router = click.Group()


@router.command("simulate")
@pass_state
def simulate_command(state: CliState):
    """
    Integrate the surface equations on the periodic mother domain.

    Writes trajectory/state_NNNNN.csv (x, zeta, psi) every save_every steps,
    trajectory/index.json and a profile SVG of the final state.
    """
    with run_command(state, "simulate"):
        config = state.config
        settings = sim_config(config)
        mother = mother_grid(window_grid(config), config.window.mother_domain_factor, config.window.offset_nodes)
        bottom = profile(config.profiles.bottom, mother)
        init = WaveState(
            profile(config.profiles.initial_surface, mother),
            profile(config.profiles.initial_potential, mother),
        )
        trajectory = simulate(init, bottom, settings)
        reports = state.reports
        index = write_trajectory(reports, trajectory, config.time.save_every)
        final = trajectory[-1]
        figure = plots.profiles_figure(
            {"bottom": bottom, "zeta": final.zeta, "psi": final.psi}, f"t = {final.t:.4g}"
        )
        reports.write_figure("trajectory/final_state.svg", figure)
        plots.close(figure)
        click.echo(f"{len(trajectory) - 1} steps written to {index}")


@router.command("measure")
@click.option("--trajectory", "trajectory_path", type=click.Path(), default=None,
              help="Trajectory index JSON; defaults to trajectory/index.json in the output directory.")
@pass_state
def measure_command(state: CliState, trajectory_path: Optional[str]):
    """Restrict the saved state nearest t0 to the window and write measurement.json."""
    with run_command(state, "measure"):
        config = state.config
        settings = sim_config(config)
        reports = state.reports
        trajectory = read_trajectory(trajectory_path or str(reports.path("trajectory/index.json")))
        mother = trajectory[0].grid
        bottom = profile(config.profiles.bottom, mother)
        t0 = config.time.t_end if config.time.t0 is None else config.time.t0
        m = measure(trajectory, t0, bottom, window_grid(config), settings)
        path = reports.write_measurement("measurement.json", m)
        figure = plots.profiles_figure({"zeta": m.zeta, "dt_zeta": m.dt_zeta, "psi": m.psi}, f"t0 = {m.t0:.4g}")
        reports.write_figure("measurement.svg", figure)
        plots.close(figure)
        click.echo(f"measurement at t0={m.t0:.6g} written to {path}")
