import numpy as np
import pytest

from bathy.elliptic import LateralTrace, SolverSettings, dno
from bathy.exceptions import ConfigError, InfeasibleInitialGuess
from bathy.geometry import Grid1D, ScalarField, build_domain
from bathy.inversion import (
    InversionOptions,
    add_noise,
    gradient,
    invert,
    is_identifiable,
    l1_error,
    misfit,
    noise_sweep,
)
from bathy.sampling import make_rng
from bathy.verification import SuiteSettings, check_gradient
from bathy.waves import MeasurementTuple


def synthetic(grid, b_true, opts, psi=None):
    zeta = ScalarField.constant(grid, 0.0)
    psi = psi if psi is not None else ScalarField(grid, grid.nodes)
    theta = LateralTrace.constant(opts.n_sigma, psi.values[0], psi.values[-1])
    data = dno(build_domain(b_true, zeta, opts.depth_floor), psi, theta, opts.n_sigma, opts.solver)
    return MeasurementTuple(zeta, data, psi, b_true.values[0], b_true.values[-1], 0.0, theta)


@pytest.fixture
def opts():
    return InversionOptions(alpha_reg=0.0, n_sigma=17)


def test_options_validation():
    with pytest.raises(ConfigError):
        InversionOptions(alpha_reg=-1.0)
    with pytest.raises(ConfigError):
        InversionOptions(depth_floor=0.0)
    with pytest.raises(ConfigError):
        InversionOptions(memory=0)


def test_l1_error_oracles():
    grid = Grid1D(0.0, 1.0, 101)
    flat = ScalarField.constant(grid, -1.0)
    assert l1_error(flat, ScalarField.constant(grid, -0.9)) == pytest.approx(0.1)
    bump = ScalarField(grid, -1.0 + np.maximum(0.0, 0.1 - np.abs(grid.nodes - 0.5)))
    assert l1_error(bump, flat) == pytest.approx(0.01)
    assert l1_error(bump, bump) == 0.0


def test_misfit_vanishes_at_truth(window, bump_bottom, opts):
    m = synthetic(window, bump_bottom, opts)
    assert misfit(bump_bottom, m, None, opts) < 1e-20
    assert misfit(ScalarField.constant(window, -1.0), m, None, opts) > 1e3 * misfit(bump_bottom, m, None, opts)


def test_gradient_endpoints_are_pinned(window, bump_bottom, opts):
    m = synthetic(window, bump_bottom, opts)
    g = gradient(ScalarField.constant(window, -1.0), m, None, opts)
    assert g.values[0] == g.values[-1] == 0.0
    assert np.max(np.abs(g.values)) > 0


@pytest.mark.physics
def test_gradient_matches_finite_differences(window):
    result = check_gradient(SuiteSettings(grid=window, n_sigma=17, solver=SolverSettings(), gradient_nodes=5))
    assert result.passed, result


def test_converged_at_truth(window, bump_bottom, opts):
    m = synthetic(window, bump_bottom, opts)
    result = invert(m, None, bump_bottom, opts, b_true=bump_bottom)
    assert result.converged
    assert result.stop_reason == "gradient"
    assert result.iterations == 0
    assert result.l1_error_vs_truth == pytest.approx(0.0, abs=1e-12)
    assert result.to_report()["misfit_history"] == result.misfit_history


def test_still_water_is_not_identifiable(window, bump_bottom, opts):
    m = synthetic(window, bump_bottom, opts, psi=ScalarField.constant(window, 0.3))
    assert not is_identifiable(m)
    flat = ScalarField.constant(window, -1.0)
    assert misfit(flat, m, None, opts) == pytest.approx(misfit(bump_bottom, m, None, opts), abs=1e-18)
    result = invert(m, None, flat, opts)
    assert not result.identifiable
    assert result.converged and result.iterations == 0


def test_infeasible_initial_guess(window, bump_bottom, opts):
    m = synthetic(window, bump_bottom, opts)
    too_high = ScalarField.constant(window, -0.05)
    with pytest.raises(InfeasibleInitialGuess):
        invert(m, None, too_high, opts)


def test_misfit_decreases_from_flat_start(window, bump_bottom):
    opts = InversionOptions(alpha_reg=1e-6, n_sigma=17, max_iters=5)
    m = synthetic(window, bump_bottom, opts)
    result = invert(m, None, ScalarField.constant(window, -1.0), opts, b_true=bump_bottom)
    history = result.misfit_history
    assert len(history) == result.iterations + 1
    assert all(later <= earlier for earlier, later in zip(history, history[1:]))
    assert history[-1] < history[0]
    assert np.all(result.b_est.values <= m.zeta.values - opts.depth_floor + 1e-12)
    assert result.b_est.values[0] == bump_bottom.values[0]


def test_add_noise_is_seeded(window, bump_bottom, opts):
    m = synthetic(window, bump_bottom, opts)
    a = add_noise(m, 1e-2, make_rng(4))
    b = add_noise(m, 1e-2, make_rng(4))
    np.testing.assert_array_equal(a.dt_zeta.values, b.dt_zeta.values)
    assert not np.array_equal(a.dt_zeta.values, m.dt_zeta.values)
    np.testing.assert_array_equal(add_noise(m, 0.0, make_rng(4)).dt_zeta.values, m.dt_zeta.values)


def gaussian_bump(grid):
    return ScalarField.from_function(grid, lambda x: -1.0 + 0.2 * np.exp(-50.0 * (x - 0.5) ** 2))


@pytest.mark.slow
def test_bump_recovery():
    grid = Grid1D(0.0, 1.0, 129)
    b_true = gaussian_bump(grid)
    opts = InversionOptions(alpha_reg=1e-6, n_sigma=33, max_iters=400)
    # a stronger flow makes the data term dominate the gradient penalty
    m = synthetic(grid, b_true, opts, psi=ScalarField(grid, 10.0 * grid.nodes))
    result = invert(m, None, ScalarField.constant(grid, -1.0), opts, b_true=b_true)
    assert result.stop_reason != "ftol"
    reference = l1_error(b_true, ScalarField.constant(grid, -1.0))
    assert result.l1_error_vs_truth <= 0.05 * reference


def test_zero_ftol_never_stops_on_progress(window, bump_bottom):
    opts = InversionOptions(alpha_reg=1e-6, n_sigma=17, max_iters=4)
    m = synthetic(window, bump_bottom, opts)
    result = invert(m, None, ScalarField.constant(window, -1.0), opts)
    assert result.stop_reason in ("max_iters", "gradient", "line_search")


@pytest.mark.slow
def test_noise_sweep_error_grows_with_level():
    grid = Grid1D(0.0, 1.0, 33)
    b_true = gaussian_bump(grid)
    opts = InversionOptions(alpha_reg=1e-6, n_sigma=17, max_iters=300)
    m = synthetic(grid, b_true, opts, psi=ScalarField(grid, 10.0 * grid.nodes))
    results = noise_sweep(m, ScalarField.constant(grid, -1.0), opts, [1e-2, 1e-4, 1e-3], seed=7, b_true=b_true)
    errors = [r.l1_error_vs_truth for r in results]
    slack = 0.01 * l1_error(b_true, ScalarField.constant(grid, -1.0))
    assert all(later >= earlier - slack for earlier, later in zip(errors, errors[1:]))


def test_noise_levels_scale_one_draw(window, bump_bottom, opts):
    m = synthetic(window, bump_bottom, opts)
    small = add_noise(m, 1e-3, make_rng(7)).dt_zeta.values - m.dt_zeta.values
    large = add_noise(m, 1e-2, make_rng(7)).dt_zeta.values - m.dt_zeta.values
    np.testing.assert_allclose(large, 10.0 * small, rtol=1e-9)
