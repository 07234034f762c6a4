"""
Built-in oracle suite run by the verify command.

Every check returns a CheckResult instead of raising, so one broken check
never hides the others. Tolerances scale with h^2, where h is the coarser of
the horizontal spacing and the sigma spacing.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from bathy import certificate
from bathy.elliptic import (
    LateralTrace,
    SolverSettings,
    StripHarmonic,
    dno,
    dno_from_field,
    energy,
    green_balance,
    integrate_region,
    solve_potential,
    surface_traces,
    traces_from_measurements,
)
from bathy.exceptions import BathyError
from bathy.geometry import (
    Component,
    Grid1D,
    ScalarField,
    build_domain,
    decompose_interbottom,
    fatness_radius,
    weighted_l2,
)
from bathy.inversion import InversionOptions, gradient_check
from bathy.sampling import make_rng, random_admissible_pair
from bathy.scheduler import SweepScheduler
from bathy.waves import MeasurementTuple

logger = logging.getLogger(__name__)

CONVERGENCE_GRIDS = (33, 65, 129, 257)
DISPERSION_NODES = 257


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def row(self) -> tuple:
        return self.name, "PASS" if self.passed else "FAIL", self.value, self.threshold, self.detail


@dataclass(frozen=True)
class SuiteSettings:
    grid: Grid1D
    n_sigma: int
    solver: SolverSettings
    pairs: int = 20
    configurations: int = 10
    gradient_nodes: int = 6
    seed: Optional[int] = 0

    @property
    def h(self) -> float:
        return max(self.grid.spacing, 1.0 / (self.n_sigma - 1))


def _guarded(name: str, check: Callable[[], CheckResult]) -> CheckResult:
    try:
        return check()
    except BathyError as exc:
        logger.warning("check %s raised %s: %s", name, type(exc).__name__, exc.detail)
        return CheckResult(name, False, math.nan, math.nan, f"{type(exc).__name__}: {exc.detail}")


def _strip_solve(n: int, n_sigma: int, settings: SolverSettings, k: float = 2.0 * math.pi, h: float = 1.0):
    grid = Grid1D(0.0, 1.0, n)
    strip = StripHarmonic(k, h)
    phi = solve_potential(strip.domain(grid), strip.surface_potential(grid), strip.wall_trace(grid, n_sigma), n_sigma, settings)
    return grid, strip, phi


def observed_order(spacings, errors) -> float:
    """Slope of log(error) against log(spacing), fitted over every grid."""
    slope, _ = np.polyfit(np.log(spacings), np.log(errors), 1)
    return float(slope)


def check_convergence(settings: SuiteSettings) -> CheckResult:
    """L2 error of the strip harmonic on refined grids; fitted order at least 1.7."""
    spacings, errors = [], []
    for n in CONVERGENCE_GRIDS:
        grid, strip, phi = _strip_solve(n, n, settings.solver)
        exact = strip.potential(grid.nodes[:, None], phi.sigma_map.y)
        spacings.append(grid.spacing)
        errors.append(math.sqrt(integrate_region(phi, (phi.values - exact) ** 2)))
    order = observed_order(spacings, errors)
    return CheckResult("elliptic convergence order", order >= 1.7, order, 1.7, f"errors {errors}")


def check_dispersion(settings: SuiteSettings) -> CheckResult:
    grid, strip, phi = _strip_solve(DISPERSION_NODES, DISPERSION_NODES, settings.solver)
    exact = strip.dno(grid)
    error = weighted_l2(dno_from_field(phi).values - exact.values, grid) / exact.l2_norm()
    return CheckResult("flat strip dispersion", error < 0.01, error, 0.01)


def _strips(settings: SuiteSettings):
    """
    Strip harmonics on the window with their exact wall data.

    Wavenumbers lie in [pi/2, pi] / L and depths in [L/4, L/2], so every
    strip is resolved on grids where the h^2 tolerances are meaningful.
    """
    grid = settings.grid
    rng = make_rng(settings.seed)
    for _ in range(settings.configurations):
        strip = StripHarmonic(math.pi * rng.uniform(0.5, 1.0) / grid.length, rng.uniform(0.25, 0.5) * grid.length)
        phi = solve_potential(
            strip.domain(grid), strip.surface_potential(grid), strip.wall_trace(grid, settings.n_sigma),
            settings.n_sigma, settings.solver,
        )
        yield strip, phi


def _periodic_configurations(settings: SuiteSettings):
    """Random shallow configurations on the window closed up periodically."""
    window = settings.grid
    grid = Grid1D(window.a1, window.a2, window.n_nodes, periodic=True)
    length = grid.length
    rng = make_rng(settings.seed)
    for _ in range(settings.configurations):
        pair = random_admissible_pair(
            grid, rng, depth=0.125 * length, bottom_amplitude=0.0125 * length,
            surface_amplitude=0.003125 * length, modes=2,
        )
        domain = build_domain(pair.b, pair.zeta, pair.h0)
        yield solve_potential(domain, pair.psi, None, settings.n_sigma, settings.solver)


def _relative_max_error(approx: np.ndarray, exact: np.ndarray) -> float:
    return float(np.max(np.abs(approx - exact))) / max(float(np.max(np.abs(exact))), 1e-300)


def check_trace_identities(settings: SuiteSettings) -> CheckResult:
    """Surface traces of strip harmonics, from the field and from (psi, zeta, normal derivative), against closed forms."""
    worst = 0.0
    for strip, phi in _strips(settings):
        x, k, h = phi.grid.nodes, strip.k, strip.h
        dy_exact = k * np.sinh(k * h) * np.cos(k * x)
        grad_x_exact = -k * np.cosh(k * h) * np.sin(k * x)
        traces = surface_traces(phi)
        dy, grad_x = traces_from_measurements(phi.psi, phi.domain.surface, traces.normal_derivative)
        worst = max(
            worst,
            _relative_max_error(traces.dy_on_surface.values, dy_exact),
            _relative_max_error(traces.grad_x_on_surface.values, grad_x_exact),
            _relative_max_error(dy.values, dy_exact),
            _relative_max_error(grad_x.values, grad_x_exact),
        )
    threshold = 5.0 * settings.h ** 2
    return CheckResult("surface trace identities", worst <= threshold, worst, threshold)


def check_green_identity(settings: SuiteSettings) -> List[CheckResult]:
    """Green's first identity and zero net flux over strips with walls and random periodic configurations."""
    worst_defect = worst_flux = 0.0
    fields = [phi for _, phi in _strips(settings)]
    fields.extend(_periodic_configurations(settings))
    for phi in fields:
        balance = green_balance(phi)
        worst_defect = max(worst_defect, balance.defect / max(1.0, balance.energy))
        worst_flux = max(worst_flux, balance.flux / max(1.0, balance.flux_scale))
    threshold = 10.0 * settings.h ** 2
    detail = f"{len(fields)} configurations"
    return [
        CheckResult("Green identity", worst_defect <= threshold, worst_defect, threshold, detail),
        CheckResult("flux balance", worst_flux <= threshold, worst_flux, threshold, detail),
    ]


def _pair_margins(grid: Grid1D, n_sigma: int, solver: SolverSettings, seed) -> dict:
    """Normalised margins of every pair inequality for one random pair (a picklable job)."""
    pair = random_admissible_pair(grid, make_rng(seed)).solve(n_sigma, solver)
    sides = certificate.lemma31_sides(pair)
    g_terms = certificate.g2_to_g5(pair)
    scale = max(1.0, abs(sides.rhs), abs(sides.lhs))
    return {
        "energy inequality": sides.margin / scale,
        "trace shift": min(certificate.lemma41_check(pair)) / max(1.0, pair.h2_norms[0]),
        "surface gradient bound": min(certificate.lemma42_check(pair, g_terms.g1)) / max(1.0, math.sqrt(g_terms.g1.g1)),
        "surface term bounds": min(certificate.prop43_check(pair, g_terms)) / max(1.0, g_terms.g2, g_terms.g3),
    }


def check_pair_margins(settings: SuiteSettings, scheduler: SweepScheduler) -> List[CheckResult]:
    seeds = np.random.SeedSequence(settings.seed).generate_state(settings.pairs).tolist()
    margins = scheduler.map(
        _pair_margins, [(settings.grid, settings.n_sigma, settings.solver, seed) for seed in seeds]
    )
    threshold = -10.0 * settings.h ** 2
    results = []
    for name in margins[0] if margins else ():
        worst = min(m[name] for m in margins)
        results.append(CheckResult(f"{name} margin", worst >= threshold, worst, threshold, f"{len(margins)} pairs"))
    return results


def check_identical_pair(settings: SuiteSettings) -> CheckResult:
    pair_data = random_admissible_pair(settings.grid, make_rng(settings.seed))
    phi = solve_potential(build_domain(pair_data.b, pair_data.zeta, pair_data.h0), pair_data.psi, None, settings.n_sigma, settings.solver)
    pair = certificate.PairConfiguration(phi, phi)
    sides = certificate.lemma31_sides(pair)
    g_terms = certificate.g2_to_g5(pair)
    values = [g_terms.g1.g1, g_terms.g2, g_terms.g3, g_terms.g4, g_terms.g5, certificate.tbot(pair), sides.lhs, sides.rhs]
    worst = max(abs(v) for v in values)
    return CheckResult("identical pair zeros", worst <= 1e-12, worst, 1e-12)


def check_fatness_square(side: float = 0.4) -> CheckResult:
    component = Component(
        sign=1, node_range=(0, 1), x_start=0.0, x_end=side, area=side * side,
        span_x=np.array([0.0, side]), lower=np.array([-1.0, -1.0]), upper=np.array([side - 1.0, side - 1.0]),
        spacing=side / 8.0,
    )
    rho, _ = fatness_radius(component)
    pixel = side / 64.0
    exact = (1.0 - 1.0 / math.sqrt(2.0)) * side / 2.0
    return CheckResult("square fatness radius", abs(rho - exact) <= pixel, abs(rho - exact), pixel)


def check_size_estimate(settings: SuiteSettings) -> List[CheckResult]:
    """Rectangular gap over a flat bottom with phi0 = X, whose energy density is one."""
    grid = Grid1D(0.0, 1.0, 65)
    x = grid.nodes
    b0 = ScalarField.constant(grid, -1.0)
    b = ScalarField(grid, np.where((x >= 0.25) & (x <= 0.75), -0.7, -1.0))
    surface = ScalarField.constant(grid, 0.0)
    psi = ScalarField(grid, x)
    pair = certificate.solve_pair(b, surface, psi, b0, surface, psi, 0.25, n_sigma=settings.n_sigma, settings=settings.solver)
    area = decompose_interbottom(b, b0).total_area
    gap_energy = energy(pair.phi0, lower=b0, upper=b)
    cbot, _ = certificate.estimate_cbot(pair)
    ratio = gap_energy / energy(pair.phi0)
    return [
        CheckResult("gap energy equals gap area", abs(gap_energy - area) <= 1e-6, abs(gap_energy - area), 1e-6),
        CheckResult("size constant below energy ratio", cbot * area <= ratio, cbot * area, ratio),
    ]


def check_gradient(settings: SuiteSettings) -> CheckResult:
    grid = settings.grid
    x = (grid.nodes - grid.a1) / grid.length
    surface = ScalarField.constant(grid, 0.0)
    psi = ScalarField(grid, x)
    b_true = ScalarField(grid, -1.0 + 0.2 * np.exp(-50.0 * (x - 0.5) ** 2))
    opts = InversionOptions(alpha_reg=1e-6, n_sigma=settings.n_sigma, solver=settings.solver)
    theta = LateralTrace.constant(settings.n_sigma, psi.values[0], psi.values[-1])
    data = dno(build_domain(b_true, surface, opts.depth_floor), psi, theta, settings.n_sigma, settings.solver)
    m = MeasurementTuple(surface, data, psi, b_true.values[0], b_true.values[-1], 0.0, theta)
    rng = make_rng(settings.seed)
    wiggle = 0.05 * np.sin(np.pi * x) * rng.uniform(0.5, 1.0)
    candidate = b_true.with_values(b_true.values - wiggle)
    interior = max(grid.n_nodes - 2, 1)
    nodes = sorted({int(i) for i in np.linspace(1, interior, min(settings.gradient_nodes, interior))})
    worst = gradient_check(candidate, m, theta, opts, nodes)
    return CheckResult("adjoint gradient vs finite differences", worst <= 1e-4, worst, 1e-4, f"nodes {nodes}")


def run_suite(settings: SuiteSettings, scheduler: Optional[SweepScheduler] = None) -> List[CheckResult]:
    """Run every check in a fixed order."""
    scheduler = scheduler or SweepScheduler()
    if settings.grid.n_nodes < 9:
        logger.warning("grid with %d nodes is too coarse for the h^2 tolerances", settings.grid.n_nodes)
    results = [
        _guarded("convergence", lambda: check_convergence(settings)),
        _guarded("dispersion", lambda: check_dispersion(settings)),
        _guarded("traces", lambda: check_trace_identities(settings)),
    ]
    for name, group in (
        ("green", lambda: check_green_identity(settings)),
        ("pairs", lambda: check_pair_margins(settings, scheduler)),
        ("size estimate", lambda: check_size_estimate(settings)),
    ):
        try:
            results.extend(group())
        except BathyError as exc:
            logger.warning("check group %s raised %s", name, exc.detail)
            results.append(CheckResult(name, False, math.nan, math.nan, f"{type(exc).__name__}: {exc.detail}"))
    results.append(_guarded("identical pair", lambda: check_identical_pair(settings)))
    results.append(_guarded("fatness", check_fatness_square))
    results.append(_guarded("gradient", lambda: check_gradient(settings)))
    return results
