import logging
import os
from typing import Optional

import click
from dotenv import load_dotenv

from bathy import models
from bathy.commands import (
    certify_commands,
    invert_commands,
    run_commands,
    simulate_commands,
    solve_commands,
    verify_commands,
)
from bathy.commands.common import CliState
from bathy.database import engine

load_dotenv()

models.Base.metadata.create_all(bind=engine)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="TOML experiment config.")
@click.option("--out", type=click.Path(), default=None, help="Output directory (default: BATHY_OUTPUT_DIR).")
@click.option("--seed", type=int, default=None, help="Seed of every random stream.")
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True, help="Worker processes for sweeps.")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], out: Optional[str], seed: Optional[int], threads: int):
    """Bathymetry stability toolkit: simulate, measure, solve, certify, invert, verify."""
    logging.basicConfig(
        level=os.getenv("BATHY_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    ctx.obj = CliState(config_path=config_path, out=out, seed=seed, threads=threads)


def include_router(group: click.Group, router: click.Group) -> None:
    for command in router.commands.values():
        group.add_command(command)


include_router(cli, simulate_commands.router)
include_router(cli, solve_commands.router)
include_router(cli, certify_commands.router)
include_router(cli, invert_commands.router)
include_router(cli, verify_commands.router)
include_router(cli, run_commands.router)


if __name__ == "__main__":
    cli()
