import numpy as np
import pytest

from bathy.exceptions import ConfigError
from bathy.expressions import evaluate, parse_profile, profile_field
from bathy.geometry import Grid1D


def test_profile_with_power_and_constants():
    grid = Grid1D(0.0, 1.0, 11)
    field = profile_field("-1 + 0.2*exp(-50*(X - 0.5)^2)", grid)
    np.testing.assert_allclose(field.values, -1 + 0.2 * np.exp(-50 * (grid.nodes - 0.5) ** 2))


def test_constant_expression_broadcasts():
    values = evaluate("-1", np.linspace(0.0, 1.0, 5))
    np.testing.assert_array_equal(values, np.full(5, -1.0))


def test_wall_expression_uses_y():
    values = evaluate("X*Y + EPS", np.array([1.0, 2.0]), np.array([-0.5, -1.0]), eps=0.25)
    np.testing.assert_allclose(values, [-0.25, -1.75])


@pytest.mark.parametrize("text", ["foo(X)", "X + Z", "X +", "__import__('os')", "os.system('true')", "X < 1"])
def test_rejected_expressions(text):
    with pytest.raises(ConfigError):
        parse_profile(text)


def test_non_finite_values_are_rejected():
    with pytest.raises(ConfigError, match="not finite"):
        evaluate("1/X", np.array([0.0, 1.0]))
