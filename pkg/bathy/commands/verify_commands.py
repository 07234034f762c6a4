import click

from bathy.commands.common import CliState, pass_state, run_command, solver_settings, window_grid
from bathy.exceptions import VerificationFailed
from bathy.verification import SuiteSettings, run_suite

router = click.Group()


@router.command("verify")
@pass_state
def verify_command(state: CliState):
    """
    Run the built-in oracle suite and print a pass/fail table.

    Writes verify.csv. Exits 0 when every check passes and 1 otherwise.
    """
    with run_command(state, "verify"):
        config = state.config
        settings = SuiteSettings(
            grid=window_grid(config),
            n_sigma=config.grid.n_sigma,
            solver=solver_settings(config),
            pairs=config.verify.pairs,
            configurations=config.verify.configurations,
            gradient_nodes=config.verify.gradient_nodes,
            seed=state.effective_seed,
        )
        results = run_suite(settings, state.scheduler)
        state.reports.write_rows(
            "verify.csv", ("check", "status", "value", "threshold", "detail"), (r.row() for r in results)
        )
        width = max(len(r.name) for r in results)
        for r in results:
            click.echo(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.value:.3e}  (threshold {r.threshold:.3e})")
        failed = [r.name for r in results if not r.passed]
        if failed:
            raise VerificationFailed(f"failed checks: {', '.join(failed)}")
        click.echo(f"all {len(results)} checks passed")
