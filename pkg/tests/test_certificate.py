import math

import numpy as np
import pytest

from bathy import certificate
from bathy.certificate import (
    ConfigConstants,
    PairConfiguration,
    estimate_cbot,
    estimate_crho,
    loglog_value,
    solve_pair,
    theorem46_report,
)
from bathy.elliptic import SolverSettings, solve_potential
from bathy.exceptions import (
    ConfigError,
    HypothesisViolation,
    IdenticalPair,
    NoComponents,
    PointTooNearBoundary,
    ZeroEnergy,
)
from bathy.geometry import Grid1D, ScalarField, build_domain
from bathy.sampling import make_rng, random_admissible_pair
from bathy.schemas import Verdict
from bathy.verification import SuiteSettings, _pair_margins, check_identical_pair, check_size_estimate


@pytest.fixture
def suite(window):
    return SuiteSettings(grid=window, n_sigma=17, solver=SolverSettings(), pairs=2, configurations=2, seed=3)


@pytest.fixture
def random_pair(window):
    return random_admissible_pair(window, make_rng(11)).solve(n_sigma=17)


@pytest.mark.parametrize("kwargs", [{"s": 0.5}, {"s": 0.0}, {"big_c": 0.0}, {"small_c": 2.0}, {"h2_norm_mode": "max"}])
def test_constants_validation(kwargs):
    with pytest.raises(ConfigError):
        ConfigConstants(**kwargs)


def test_loglog_guards():
    assert loglog_value(math.e, 1.0, 1.0, 1.0, 0.25) is None
    assert loglog_value(2.0, 1.0, 1.0, 1.0, 0.25) is None
    assert loglog_value(math.inf, 1.0, 1.0, 1.0, 0.25) == 0.0


def test_loglog_closed_form():
    value = loglog_value(math.exp(math.e ** 2), 1.0, 1.0, 1.0, 0.25)
    assert value == pytest.approx(2 ** -0.125 + 3 * 2 ** -0.03125)


def test_loglog_decreases_with_ratio():
    values = [loglog_value(r, 1.0, 2.0, 1.0, 0.25) for r in (10.0, 1e3, 1e6, 1e12)]
    assert all(a > b > 0 for a, b in zip(values, values[1:]))


def test_identical_pair_terms_vanish(suite):
    result = check_identical_pair(suite)
    assert result.passed, result


def test_identical_pair_is_refused(window, bump_bottom):
    zeta = ScalarField.constant(window, 0.0)
    psi = ScalarField(window, np.cos(np.pi * window.nodes))
    phi = solve_potential(build_domain(bump_bottom, zeta, 0.5), psi, n_sigma=17)
    pair = PairConfiguration(phi, phi)
    assert pair.is_identical()
    assert pair.l1_distance == 0.0
    with pytest.raises(IdenticalPair):
        theorem46_report(pair, ConfigConstants())
    with pytest.raises(IdenticalPair):
        certificate.tlog(pair, ConfigConstants())
    with pytest.raises(NoComponents):
        estimate_cbot(pair)


def test_surfaces_too_far_apart(window, flat):
    b, zeta = flat
    psi = ScalarField(window, window.nodes)
    zeta0 = ScalarField.constant(window, 0.3)
    with pytest.raises(HypothesisViolation, match="half the minimum depth"):
        solve_pair(b, zeta, psi, b, zeta0, psi, 0.5, n_sigma=9)


def test_pairs_live_on_a_window():
    grid = Grid1D(0.0, 1.0, 16, periodic=True)
    domain = build_domain(ScalarField.constant(grid, -1.0), ScalarField.constant(grid, 0.0), 0.5)
    phi = solve_potential(domain, ScalarField(grid, np.cos(2 * np.pi * grid.nodes)), n_sigma=9)
    with pytest.raises(ConfigError):
        PairConfiguration(phi, phi)


@pytest.mark.physics
def test_size_estimate_oracle(suite):
    for result in check_size_estimate(suite):
        assert result.passed, result


def test_crho_preconditions(window, flat):
    b, zeta = flat
    still = solve_potential(build_domain(b, zeta, 0.5), ScalarField.constant(window, 0.0), n_sigma=9)
    with pytest.raises(ZeroEnergy):
        estimate_crho(still, 0.05, [(0.5, -0.5)])
    moving = solve_potential(build_domain(b, zeta, 0.5), ScalarField(window, window.nodes), n_sigma=9)
    with pytest.raises(PointTooNearBoundary):
        estimate_crho(moving, 0.05, [(0.5, -0.1)])
    # unit energy density: the disk holds its own area
    assert estimate_crho(moving, 0.05, [(0.5, -0.5)]) == pytest.approx(math.pi * 0.05 ** 2, rel=1e-6)


def test_lemma41_without_first_part(window, flat, linear_potential):
    b, zeta = flat
    pair = solve_pair(b, zeta, linear_potential, b, zeta, ScalarField(window, 2 * window.nodes), 0.5, n_sigma=9)
    assert not np.any(pair.split.s1_mask)
    margins = certificate.lemma41_check(pair)
    assert margins[0] == margins[1] == margins[2] == 0.0


def test_unknown_cross_mode(random_pair):
    with pytest.raises(ConfigError):
        certificate.g2_to_g5(random_pair, cross_mode="guess")


@pytest.mark.physics
def test_pair_inequalities_hold_on_a_random_pair(window):
    h = max(window.spacing, 1.0 / 16)
    margins = _pair_margins(window, 17, SolverSettings(), 5)
    for name, margin in margins.items():
        assert margin >= -10 * h ** 2, name


@pytest.mark.physics
def test_report_is_consistent(random_pair):
    constants = ConfigConstants()
    report = theorem46_report(random_pair, constants, seed=11, generator="numpy.PCG64")
    assert report.lhs == pytest.approx((report.terms.cbot_estimate or 0.0) * report.l1_distance)
    assert report.rhs >= 0
    assert report.l1_distance == pytest.approx(random_pair.l1_distance)
    assert report.constants == constants.as_dict()
    assert report.seed == 11
    assert set(report.smallness) == {"prop32", "thm46"}
    if report.terms.tlog1 is None or not report.covered:
        assert report.verdict is Verdict.NON_INFORMATIVE
    else:
        assert report.verdict in (Verdict.HOLDS, Verdict.VIOLATED)
    assert len(report.components) == len(random_pair.decomposition.components)


def test_bound_mode_report(random_pair):
    report = theorem46_report(random_pair, ConfigConstants(), cross_mode="bound")
    assert report.terms.g2 >= 0 and report.terms.g3 >= 0


def test_thin_component_is_not_certified(window, flat):
    b0, zeta = flat
    b = ScalarField.from_function(window, lambda x: -1.0 + 0.008 * np.exp(-50.0 * (x - 0.5) ** 2))
    psi = ScalarField(window, np.cos(np.pi * window.nodes))
    psi0 = ScalarField(window, np.cos(np.pi * window.nodes) + 0.1 * np.sin(2 * np.pi * window.nodes))
    pair = solve_pair(b, zeta, psi, b0, zeta, psi0, 0.5, n_sigma=17)
    cbot, coverage = estimate_cbot(pair)
    assert [c.fat for c in coverage] == [False]
    assert cbot == 0.0
    report = theorem46_report(pair, ConfigConstants())
    assert not report.covered
    assert report.verdict is Verdict.NON_INFORMATIVE
    assert any("is not fat" in note for note in report.notes)
