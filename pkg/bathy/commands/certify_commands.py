import logging
import math
from typing import Optional

import click

from bathy import models, plots, schemas
from bathy.certificate import PairConfiguration, solve_pair, theorem46_report
from bathy.commands.common import (
    CliState,
    constants,
    pass_state,
    profile,
    run_command,
    solver_settings,
    wall_trace,
    window_grid,
)
from bathy.exceptions import BathyError, HypothesisViolation, PreconditionError, SmallnessViolated
from bathy.sampling import GENERATOR_NAME

logger = logging.getLogger(__name__)

router = click.Group()


def pair_from_config(config: schemas.ExperimentConfig, eps: float = 0.0, perturbation: Optional[str] = None) -> PairConfiguration:
    """
    Solve both configurations of the [profiles] section.

    Fields ending in 0 fall back to the first configuration; perturbation, if
    given, replaces potential0.
    """
    p = config.profiles
    grid = window_grid(config)
    n_sigma = config.grid.n_sigma
    b = profile(p.bottom, grid, eps)
    zeta = profile(p.surface, grid, eps)
    psi = profile(p.potential, grid, eps)
    b0 = profile(p.bottom0 or p.bottom, grid, eps)
    zeta0 = profile(p.surface0 or p.surface, grid, eps)
    psi0 = profile(perturbation or p.potential0 or p.potential, grid, eps)
    return solve_pair(
        b, zeta, psi, b0, zeta0, psi0, config.physics.h0,
        theta=wall_trace(p.wall, b, zeta, n_sigma, eps),
        theta0=wall_trace(p.wall0 or p.wall, b0, zeta0, n_sigma, eps),
        n_sigma=n_sigma,
        settings=solver_settings(config),
    )


def _term_rows(report: schemas.CertificateReport):
    for name, value in report.terms.dict().items():
        if isinstance(value, list):
            for k, item in enumerate(value):
                yield f"{name}[{k}]", item
        else:
            yield name, value


@router.command("certify")
@pass_state
def certify_command(state: CliState):
    """
    Evaluate the stability bound for the pair described by [profiles].

    Writes certificate.json, terms.csv and terms.svg. Exits 4 on an identical
    pair and 5 when a precondition fails; the NON_INFORMATIVE report is
    written first.
    """
    with run_command(state, "certify"):
        config = state.config
        reports = state.reports
        try:
            pair = pair_from_config(config)
            report = theorem46_report(
                pair, constants(config), config.certificate.cross_traces,
                seed=state.seed, generator=GENERATOR_NAME,
            )
        except PreconditionError as exc:
            reports.write_json("certificate.json", {
                "verdict": schemas.Verdict.NON_INFORMATIVE.value,
                "error": type(exc).__name__,
                "detail": exc.detail,
            })
            raise
        reports.write_json("certificate.json", report)
        reports.write_rows("terms.csv", ("term", "value"), _term_rows(report))
        figure = plots.term_bars_figure(report.terms)
        reports.write_figure("terms.svg", figure)
        plots.close(figure)
        click.echo(f"verdict {report.verdict.value}: lhs {report.lhs:.6g}, rhs {report.rhs:.6g}")
        if not all(report.smallness.values()):
            raise SmallnessViolated("; ".join(report.notes))
        if not report.covered:
            raise HypothesisViolation("; ".join(report.notes))


def sweep_point(config_json: str, eps: float, seed: Optional[int]) -> dict:
    """One row of the epsilon sweep; errors become the verdict column."""
    config = schemas.ExperimentConfig.parse_raw(config_json)
    p = config.profiles
    perturbation = p.potential0 if p.potential0 and "EPS" in p.potential0 else f"({p.potential}) + EPS*sin(4*pi*X)"
    row = {"epsilon": eps, "l1_distance": math.nan, "rhs": math.nan, "h2_distance": math.nan, "verdict": None, "error": None}
    try:
        pair = pair_from_config(config, eps, perturbation)
        report = theorem46_report(pair, constants(config), config.certificate.cross_traces, seed=seed, generator=GENERATOR_NAME)
    except BathyError as exc:
        logger.info("sweep point eps=%g: %s", eps, exc.detail)
        row["error"] = type(exc).__name__
        return row
    row.update(l1_distance=report.l1_distance, rhs=report.rhs, h2_distance=report.h2_distance, verdict=report.verdict.value)
    return row


@router.command("sweep")
@pass_state
def sweep_command(state: CliState):
    """
    Certify the family psi0 = psi + EPS * dpsi for every epsilon of [certificate].

    potential0 may use EPS directly; otherwise dpsi = sin(4 pi X). Writes
    sweep.csv (epsilon, l1_distance, rhs, verdict) and sweep.svg.
    """
    with run_command(state, "sweep") as (db, run):
        config = state.config
        epsilons = sorted(config.certificate.epsilons, reverse=True)
        payload = config.json()
        rows = state.scheduler.map(sweep_point, [(payload, eps, state.seed) for eps in epsilons])
        reports = state.reports
        reports.write_rows(
            "sweep.csv",
            ("epsilon", "l1_distance", "rhs", "h2_distance", "verdict", "error"),
            ([r["epsilon"], r["l1_distance"], r["rhs"], r["h2_distance"], r["verdict"] or "", r["error"] or ""] for r in rows),
        )
        for r in rows:
            run.sweep_points.append(models.SweepPoint(
                epsilon=r["epsilon"],
                l1_distance=None if math.isnan(r["l1_distance"]) else r["l1_distance"],
                rhs=None if math.isnan(r["rhs"]) else r["rhs"],
                verdict=schemas.Verdict(r["verdict"]) if r["verdict"] else None,
            ))
        db.commit()
        figure = plots.sweep_figure(
            [r["epsilon"] for r in rows], [r["l1_distance"] for r in rows], [r["rhs"] for r in rows]
        )
        reports.write_figure("sweep.svg", figure)
        plots.close(figure)
        for r in rows:
            click.echo(f"eps={r['epsilon']:.3g}  rhs={r['rhs']:.6g}  verdict={r['verdict'] or r['error']}")
