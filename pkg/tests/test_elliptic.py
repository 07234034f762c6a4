import math

import numpy as np
import pytest

from bathy.elliptic import (
    LateralTrace,
    SolverSettings,
    StripHarmonic,
    dno,
    dno_from_field,
    energy,
    green_balance,
    h2_distance,
    integrate_region,
    solve_potential,
    surface_traces,
    traces_from_measurements,
)
from bathy.exceptions import ConfigError, GridMismatch, RegionOutsideDomain, SolverDivergence
from bathy.geometry import Grid1D, ScalarField, build_domain, weighted_l2
from bathy.verification import observed_order


def strip_solve(n, n_sigma=None, k=2 * math.pi, h=1.0, settings=None):
    n_sigma = n_sigma or n
    grid = Grid1D(0.0, 1.0, n)
    strip = StripHarmonic(k, h)
    phi = solve_potential(strip.domain(grid), strip.surface_potential(grid), strip.wall_trace(grid, n_sigma), n_sigma, settings)
    return grid, strip, phi


def test_solver_settings_validation():
    with pytest.raises(ConfigError):
        SolverSettings(method="gmres")
    with pytest.raises(ConfigError):
        SolverSettings(tol=0.0)


def test_constant_potential_is_exact(window, bump_bottom):
    zeta = ScalarField.constant(window, 0.0)
    psi = ScalarField.constant(window, 0.7)
    phi = solve_potential(build_domain(bump_bottom, zeta, 0.5), psi, n_sigma=17)
    np.testing.assert_allclose(phi.values, 0.7, atol=1e-12)
    np.testing.assert_allclose(dno_from_field(phi).values, 0.0, atol=1e-10)
    assert energy(phi) == pytest.approx(0.0, abs=1e-16)


def test_linear_potential_over_flat_bottom(window, flat, linear_potential):
    b, zeta = flat
    phi = solve_potential(build_domain(b, zeta, 0.5), linear_potential, n_sigma=9)
    np.testing.assert_allclose(phi.values, np.repeat(window.nodes[:, None], 9, axis=1), atol=1e-12)
    phi_x, phi_y = phi.gradient
    np.testing.assert_allclose(phi_x, 1.0, atol=1e-10)
    np.testing.assert_allclose(phi_y, 0.0, atol=1e-10)
    assert energy(phi) == pytest.approx(1.0, rel=1e-10)
    assert phi.diagnostics.residual < 1e-12


@pytest.mark.physics
def test_strip_harmonic_second_order():
    spacings, errors = [], []
    for n in (17, 33, 65, 129):
        grid, strip, phi = strip_solve(n)
        exact = strip.potential(grid.nodes[:, None], phi.sigma_map.y)
        spacings.append(grid.spacing)
        errors.append(math.sqrt(integrate_region(phi, (phi.values - exact) ** 2)))
    assert observed_order(spacings, errors) >= 1.7
    assert errors == sorted(errors, reverse=True)


@pytest.mark.physics
def test_flat_strip_dispersion():
    grid, strip, phi = strip_solve(129)
    exact = strip.dno(grid)
    error = weighted_l2(dno_from_field(phi).values - exact.values, grid) / exact.l2_norm()
    assert error < 0.01


@pytest.mark.physics
def test_strip_energy_matches_closed_form():
    grid, strip, phi = strip_solve(65)
    assert energy(phi) == pytest.approx(strip.energy(grid), rel=1e-2)


def test_periodic_strip_dno():
    grid = Grid1D(0.0, 1.0, 64, periodic=True)
    strip = StripHarmonic(2 * math.pi, 1.0)
    domain = build_domain(ScalarField.constant(grid, -1.0), ScalarField.constant(grid, 0.0), 0.5)
    g = dno(domain, strip.surface_potential(grid), n_sigma=65)
    assert g.values == pytest.approx(strip.dno(grid).values, abs=0.02 * strip.k * math.sinh(strip.k))


@pytest.mark.physics
def test_surface_traces_recover_gradient(window, bump_bottom):
    zeta = ScalarField(window, 0.03 * np.cos(2 * np.pi * window.nodes))
    psi = ScalarField(window, np.sin(np.pi * window.nodes))
    phi = solve_potential(build_domain(bump_bottom, zeta, 0.5), psi, n_sigma=33)
    traces = surface_traces(phi)
    dy, grad_x = traces_from_measurements(phi.psi, zeta, traces.normal_derivative)
    np.testing.assert_allclose(dy.values, traces.dy_on_surface.values, atol=1e-10)
    np.testing.assert_allclose(grad_x.values, traces.grad_x_on_surface.values, atol=1e-10)
    phi_x, phi_y = phi.gradient
    h = window.spacing
    assert weighted_l2(dy.values - phi_y[:, -1], window) <= 5 * h ** 2 * max(1.0, np.max(np.abs(phi_y[:, -1])))


@pytest.mark.physics
def test_green_identity_and_flux():
    grid = Grid1D(0.0, 1.0, 64, periodic=True)
    x = grid.nodes
    b = ScalarField(grid, -0.25 + 0.025 * np.cos(2 * np.pi * x))
    psi = ScalarField(grid, np.cos(2 * np.pi * x))
    phi = solve_potential(build_domain(b, ScalarField.constant(grid, 0.0), 0.1), psi, n_sigma=33)
    balance = green_balance(phi)
    tolerance = 10 * max(grid.spacing, 1 / 32) ** 2
    assert balance.defect / max(1.0, balance.energy) <= tolerance
    assert balance.flux / max(1.0, balance.flux_scale) <= tolerance


@pytest.mark.physics
@pytest.mark.parametrize("k", [math.pi / 2, math.pi])
def test_green_identity_with_walls(k):
    grid, strip, phi = strip_solve(65, 33, k=k, h=0.5)
    balance = green_balance(phi)
    tolerance = 10 * (1 / 32) ** 2
    assert balance.energy == pytest.approx(strip.energy(grid), rel=tolerance)
    assert balance.defect / max(1.0, balance.energy) <= tolerance
    assert balance.flux / max(1.0, balance.flux_scale) <= tolerance


@pytest.mark.physics
def test_surface_traces_match_strip_closed_form():
    grid, strip, phi = strip_solve(65, 33, k=0.75 * math.pi, h=0.4)
    x, k, h = grid.nodes, strip.k, strip.h
    traces = surface_traces(phi)
    dy_exact = k * np.sinh(k * h) * np.cos(k * x)
    grad_x_exact = -k * np.cosh(k * h) * np.sin(k * x)
    tolerance = 5 * (1 / 32) ** 2
    assert np.max(np.abs(traces.dy_on_surface.values - dy_exact)) <= tolerance * np.max(np.abs(dy_exact))
    assert np.max(np.abs(traces.grad_x_on_surface.values - grad_x_exact)) <= tolerance * np.max(np.abs(grad_x_exact))


def test_energy_splits_over_layers(window, flat, linear_potential):
    b, zeta = flat
    phi = solve_potential(build_domain(b, zeta, 0.5), linear_potential, n_sigma=9)
    middle = ScalarField.constant(window, -0.4)
    assert energy(phi, upper=middle) + energy(phi, lower=middle) == pytest.approx(energy(phi), rel=1e-12)
    assert energy(phi, upper=middle) == pytest.approx(0.6, rel=1e-10)


def test_region_outside_domain(window, flat, linear_potential):
    b, zeta = flat
    phi = solve_potential(build_domain(b, zeta, 0.5), linear_potential, n_sigma=9)
    with pytest.raises(RegionOutsideDomain):
        energy(phi, upper=ScalarField.constant(window, 0.5))


def test_h2_distance_of_a_field_to_itself(window, bump_bottom):
    zeta = ScalarField.constant(window, 0.0)
    psi = ScalarField(window, np.cos(np.pi * window.nodes))
    phi = solve_potential(build_domain(bump_bottom, zeta, 0.5), psi, n_sigma=17)
    assert h2_distance(phi, phi, bump_bottom, zeta) == pytest.approx(0.0, abs=1e-12)


def test_wall_traces_must_match_layers(window, flat, linear_potential):
    b, zeta = flat
    with pytest.raises(GridMismatch):
        solve_potential(build_domain(b, zeta, 0.5), linear_potential, LateralTrace.constant(5, 0.0, 1.0), n_sigma=9)


def test_loose_iterative_solver_is_rejected(window, flat, linear_potential):
    b, zeta = flat
    psi = ScalarField(window, np.cos(2 * np.pi * window.nodes))
    with pytest.raises(SolverDivergence):
        solve_potential(
            build_domain(b, zeta, 0.5), psi, n_sigma=33,
            settings=SolverSettings(method="bicgstab", tol=1e-14, maxiter=3),
        )
