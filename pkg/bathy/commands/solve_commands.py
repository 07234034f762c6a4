import click

from bathy.commands.common import (
    CliState,
    echo_json,
    pass_state,
    profile,
    run_command,
    solver_settings,
    wall_trace,
    window_grid,
)
from bathy.elliptic import dno_from_field, energy, green_balance, solve_potential
from bathy.geometry import build_domain

router = click.Group()


@router.command("solve")
@pass_state
def solve_command(state: CliState):
    """
    Solve the potential problem of the first configuration on the window.

    Writes potential.csv (x, sigma, y, phi), dno.csv (x, G psi) and solve.json
    with the solver diagnostics, the energy and the Green identity balance.
    """
    with run_command(state, "solve"):
        config = state.config
        grid = window_grid(config)
        bottom = profile(config.profiles.bottom, grid)
        surface = profile(config.profiles.surface, grid)
        psi = profile(config.profiles.potential, grid)
        domain = build_domain(bottom, surface, config.physics.h0)
        theta = wall_trace(config.profiles.wall, bottom, surface, config.grid.n_sigma)
        phi = solve_potential(domain, psi, theta, config.grid.n_sigma, solver_settings(config))
        reports = state.reports
        reports.write_potential("potential.csv", phi)
        reports.write_field("dno.csv", dno_from_field(phi))
        balance = green_balance(phi)
        summary = {
            "diagnostics": phi.diagnostics.to_report(),
            "energy": energy(phi),
            "green_defect": balance.defect,
            "flux": balance.flux,
            "domain": {"h0": domain.h0, "lipschitz_m0": domain.lipschitz_m0, "lipschitz_r0": domain.lipschitz_r0},
        }
        reports.write_json("solve.json", summary)
        echo_json(summary)
