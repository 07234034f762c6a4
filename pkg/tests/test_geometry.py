import math

import numpy as np
import pytest

from bathy.exceptions import DepthViolation, GridError, GridMismatch
from bathy.geometry import (
    Grid1D,
    ProfileRegion,
    ScalarField,
    build_domain,
    check_same_grid,
    decompose_interbottom,
    envelopes,
    grid_derivative,
    positive_part_integral,
    region_area,
    split_surface,
)
from bathy.verification import check_fatness_square


def test_grid_spacing_and_nodes():
    grid = Grid1D(0.0, 2.0, 5)
    assert grid.spacing == pytest.approx(0.5)
    np.testing.assert_allclose(grid.nodes, [0.0, 0.5, 1.0, 1.5, 2.0])
    assert np.sum(grid.weights()) == pytest.approx(2.0)


def test_periodic_grid_drops_right_endpoint():
    grid = Grid1D(0.0, 1.0, 4, periodic=True)
    assert grid.spacing == pytest.approx(0.25)
    assert grid.nodes[-1] == pytest.approx(0.75)
    assert np.sum(grid.weights()) == pytest.approx(1.0)


@pytest.mark.parametrize("a1, a2, n", [(0.0, 1.0, 2), (1.0, 1.0, 5), (1.0, 0.0, 5), (0.0, math.inf, 5)])
def test_invalid_grid(a1, a2, n):
    with pytest.raises(GridError):
        Grid1D(a1, a2, n)


def test_index_of():
    grid = Grid1D(0.0, 1.0, 11)
    assert grid.index_of(0.3) == 3
    assert grid.index_of(0.35) is None
    assert grid.index_of(1.5) is None


def test_derivative_exact_on_quadratics():
    grid = Grid1D(-1.0, 1.0, 9)
    x = grid.nodes
    np.testing.assert_allclose(grid_derivative(3 * x ** 2 - x, grid), 6 * x - 1, atol=1e-12)


def test_scalar_field_validation(window):
    with pytest.raises(GridMismatch):
        ScalarField(window, np.zeros(window.n_nodes + 1))
    with pytest.raises(GridError):
        ScalarField(window, np.full(window.n_nodes, np.nan))
    field = ScalarField(window, 2.0)
    assert field.max_abs() == 2.0
    with pytest.raises(ValueError):
        field.values[0] = 1.0


def test_fields_on_different_grids(window):
    other = Grid1D(0.0, 1.0, 17)
    with pytest.raises(GridMismatch):
        check_same_grid(ScalarField.constant(window, 0.0), ScalarField.constant(other, 0.0))


def test_build_domain(flat, bump_bottom):
    b, zeta = flat
    domain = build_domain(bump_bottom, zeta, 0.5)
    assert domain.h0 == 0.5
    assert domain.lipschitz_m0 > 0
    np.testing.assert_allclose(build_domain(b, zeta, 0.5).depth, 1.0)


def test_build_domain_rejects_shallow_water(flat):
    b, zeta = flat
    with pytest.raises(DepthViolation, match="below h0"):
        build_domain(b, zeta, 1.5)
    with pytest.raises(DepthViolation):
        build_domain(b, zeta, 0.0)


def test_envelopes_and_split(window):
    x = window.nodes
    zeta = ScalarField(window, 0.05 * np.sin(2 * np.pi * x))
    zeta0 = ScalarField.constant(window, 0.0)
    b = ScalarField.constant(window, -1.0)
    b0 = ScalarField(window, -1.0 + 0.1 * x)
    lower, upper = envelopes(zeta, zeta0, b, b0)
    np.testing.assert_allclose(lower.values, np.minimum(zeta.values, 0.0))
    np.testing.assert_allclose(upper.values, b0.values)
    split = split_surface(zeta, zeta0)
    assert not np.any(split.s1_mask & split.s2_mask)
    # ties belong to the second part
    assert split.s2_mask[0] and split.s2_mask[-1]
    assert split.s1_mask[window.n_nodes // 4]


def test_positive_part_integral():
    assert positive_part_integral(np.array([0.0, 1.0]), np.array([-1.0, 1.0])) == pytest.approx(0.25)
    assert positive_part_integral(np.array([0.0, 1.0]), np.array([2.0, 2.0])) == pytest.approx(2.0)
    assert positive_part_integral(np.array([0.0, 1.0]), np.array([-2.0, -1.0])) == 0.0


def test_region_area():
    grid = Grid1D(0.0, 1.0, 5)
    region = ProfileRegion(ScalarField.constant(grid, -1.0), ScalarField.constant(grid, -0.5))
    assert region_area(region) == pytest.approx(0.5)


def test_decompose_single_bump(window, bump_bottom):
    b0 = ScalarField.constant(window, -1.0)
    decomposition = decompose_interbottom(bump_bottom, b0)
    assert len(decomposition.components) == 1
    component = decomposition.components[0]
    assert component.sign_label == "+"
    exact = 0.2 * math.sqrt(math.pi / 50.0)
    assert component.area == pytest.approx(exact, rel=1e-2)
    assert component.rho > 0


def test_decompose_two_signs():
    grid = Grid1D(0.0, 1.0, 65)
    b0 = ScalarField.constant(grid, -1.0)
    b = ScalarField(grid, -1.0 + 0.1 * np.sin(2 * np.pi * grid.nodes))
    decomposition = decompose_interbottom(b, b0)
    assert [c.sign for c in decomposition.components] == [1, -1]
    for component in decomposition.components:
        assert component.area == pytest.approx(0.1 / math.pi, rel=1e-2)
    assert decomposition.total_area == pytest.approx(0.2 / math.pi, rel=1e-2)
    assert decomposition.components[0].x_end == pytest.approx(0.5, abs=grid.spacing)
    assert len(decomposition.by_sign(-1)) == 1


def test_identical_bottoms_have_no_components(window, bump_bottom):
    assert decompose_interbottom(bump_bottom, bump_bottom).components == ()


def test_square_fatness_radius():
    result = check_fatness_square()
    assert result.passed, result


def test_triangle_component():
    grid = Grid1D(0.0, 1.0, 101)
    b0 = ScalarField.constant(grid, -1.0)
    b = ScalarField(grid, -1.0 + np.maximum(0.0, 0.1 - np.abs(grid.nodes - 0.5)))
    (component,) = decompose_interbottom(b, b0).components
    assert component.sign == 1
    assert component.x_start == pytest.approx(0.4, abs=1e-9)
    assert component.x_end == pytest.approx(0.6, abs=1e-9)
    assert component.area == pytest.approx(0.01, rel=1e-9)
