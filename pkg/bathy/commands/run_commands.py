import contextlib

import click

from bathy import models
from bathy.database import get_db

router = click.Group()


@router.command("runs")
@click.option("--limit", default=20, show_default=True, help="Number of most recent runs to list.")
@click.option("--command", "command_name", default=None, help="Only list runs of this command.")
def runs_command(limit: int, command_name):
    """List recent runs recorded in the ledger."""
    with contextlib.closing(get_db()) as sessions:
        db = next(sessions)
        query = db.query(models.Run)
        if command_name:
            query = query.filter(models.Run.command == command_name)
        runs = query.order_by(models.Run.id.desc()).limit(limit).all()
        for run in runs:
            points = f", {len(run.sweep_points)} sweep points" if run.sweep_points else ""
            click.echo(
                f"#{run.id} {run.command:<9} {run.status:<7} exit={run.exit_code} "
                f"seed={run.seed} started={run.started_at:%Y-%m-%d %H:%M:%S}{points}"
            )
        if not runs:
            click.echo("no runs recorded")
