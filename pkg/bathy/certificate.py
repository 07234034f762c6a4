"""
Numerical evaluation of the bathymetry stability estimate.

A PairConfiguration holds two solved potentials on one window. From it this
module evaluates the energy inequality between the two bottoms, the boundary
and surface terms bounding it, the log-log smallness term, the size-estimate
constant C_bot, and finally the stability bound on ||b - b0||_L1 with a verdict.

Every inequality is also exposed as a margin check (right side minus left side)
so it can be verified on random pairs.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from bathy import schemas
from bathy.elliptic import (
    DEFAULT_N_SIGMA,
    LateralTrace,
    PotentialField,
    SolverSettings,
    SurfaceTraces,
    boundary_integral,
    energy,
    graph_piece,
    h2_distance,
    piece_l2,
    sobolev_h2_norm,
    solve_potential,
    surface_traces,
    trace_on_piece,
    traces_from_measurements,
    wall_piece,
)
from bathy.exceptions import (
    ConfigError,
    HypothesisViolation,
    IdenticalPair,
    NoComponents,
    PointTooNearBoundary,
    SmallnessViolated,
    ZeroEnergy,
)
from bathy.geometry import (
    Component,
    RegionDecomposition,
    ScalarField,
    SurfaceSplit,
    boundary_counting_measure,
    build_domain,
    check_same_grid,
    decompose_interbottom,
    envelopes,
    rasterize_component,
    split_surface,
    sup_norm,
    weighted_l2,
)
from bathy.schemas import Verdict

logger = logging.getLogger(__name__)

CASE_SPREAD = 1e3
SPATIAL_DIM = 1


@dataclass(frozen=True)
class ConfigConstants:
    """
    Constants of the log-log estimate.

    Attributes:
        s (float): Exponent, in (0, 1/2).
        big_c (float): Multiplicative constant C.
        small_c (float): Smallness constant c, above e.
        h2_norm_mode (str): Only the discrete Sobolev sum is implemented.
    """
    s: float = 0.25
    big_c: float = 1.0
    small_c: float = math.e + 0.01
    h2_norm_mode: str = "sobolev"

    def __post_init__(self):
        if not 0 < self.s < 0.5:
            raise ConfigError(f"s must lie in (0, 1/2), got {self.s}")
        if not self.big_c > 0:
            raise ConfigError(f"C must be positive, got {self.big_c}")
        if not self.small_c > math.e:
            raise ConfigError(f"c must exceed e, got {self.small_c}")
        if self.h2_norm_mode != "sobolev":
            raise ConfigError(f"unknown H2 norm mode '{self.h2_norm_mode}'")

    def as_dict(self) -> Dict[str, float]:
        return {"s": self.s, "C": self.big_c, "c": self.small_c}


class PairConfiguration:
    """
    Two solved configurations (b, zeta, psi, theta, phi) and (b0, zeta0, psi0, theta0, phi0).

    Derived geometry (envelopes, surface split, inter-bottom decomposition) and
    surface traces are computed lazily and cached.

    Raises:
        GridMismatch: If the potentials live on different grids.
        HypothesisViolation: If |zeta - zeta0| exceeds half the common minimum depth.
    """

    def __init__(self, phi: PotentialField, phi0: PotentialField):
        check_same_grid(phi.psi, phi0.psi)
        if phi.grid.periodic:
            raise ConfigError("pairs are compared on a non-periodic window")
        self.phi = phi
        self.phi0 = phi0
        self.h0 = min(phi.domain.h0, phi0.domain.h0)
        gap = float(np.max(np.abs(self.zeta.values - self.zeta0.values)))
        if gap > 0.5 * self.h0 * (1.0 + 1e-12):
            raise HypothesisViolation(
                f"surfaces differ by {gap:.4g}, more than half the minimum depth {self.h0:.4g}"
            )

    @property
    def grid(self):
        return self.phi.grid

    @property
    def b(self) -> ScalarField:
        return self.phi.domain.bottom

    @property
    def b0(self) -> ScalarField:
        return self.phi0.domain.bottom

    @property
    def zeta(self) -> ScalarField:
        return self.phi.domain.surface

    @property
    def zeta0(self) -> ScalarField:
        return self.phi0.domain.surface

    @property
    def psi(self) -> ScalarField:
        return self.phi.psi

    @property
    def psi0(self) -> ScalarField:
        return self.phi0.psi

    @cached_property
    def _envelopes(self) -> Tuple[ScalarField, ScalarField]:
        return envelopes(self.zeta, self.zeta0, self.b, self.b0)

    @property
    def lower_surface(self) -> ScalarField:
        return self._envelopes[0]

    @property
    def upper_bottom(self) -> ScalarField:
        return self._envelopes[1]

    @cached_property
    def split(self) -> SurfaceSplit:
        return split_surface(self.zeta, self.zeta0)

    @cached_property
    def decomposition(self) -> RegionDecomposition:
        return decompose_interbottom(self.b, self.b0, ceiling=self.lower_surface)

    @cached_property
    def traces(self) -> SurfaceTraces:
        return surface_traces(self.phi)

    @cached_property
    def traces0(self) -> SurfaceTraces:
        return surface_traces(self.phi0)

    @cached_property
    def h2_norms(self) -> Tuple[float, float]:
        return sobolev_h2_norm(self.phi), sobolev_h2_norm(self.phi0)

    @cached_property
    def energies(self) -> Tuple[float, float]:
        return energy(self.phi), energy(self.phi0)

    @cached_property
    def h2_difference(self) -> float:
        return h2_distance(self.phi, self.phi0, self.upper_bottom, self.lower_surface)

    @property
    def surface_gap(self) -> float:
        return float(np.max(np.abs(self.zeta.values - self.zeta0.values)))

    @property
    def l1_distance(self) -> float:
        return float(np.sum(self.grid.weights() * np.abs(self.b.values - self.b0.values)))

    def is_identical(self) -> bool:
        floor = 1e-12 * max(1.0, *self.h2_norms)
        return self.h2_difference <= floor


def solve_pair(
    b: ScalarField,
    zeta: ScalarField,
    psi: ScalarField,
    b0: ScalarField,
    zeta0: ScalarField,
    psi0: ScalarField,
    h0: float,
    theta: Optional[LateralTrace] = None,
    theta0: Optional[LateralTrace] = None,
    n_sigma: int = DEFAULT_N_SIGMA,
    settings: Optional[SolverSettings] = None,
) -> PairConfiguration:
    """Build both fluid domains with minimum depth h0, solve both potentials and pair them."""
    phi = solve_potential(build_domain(b, zeta, h0), psi, theta, n_sigma, settings)
    phi0 = solve_potential(build_domain(b0, zeta0, h0), psi0, theta0, n_sigma, settings)
    return PairConfiguration(phi, phi0)


def _norm(values: np.ndarray, pair: PairConfiguration, mask: Optional[np.ndarray] = None) -> float:
    return weighted_l2(values, pair.grid, mask)


@dataclass(frozen=True)
class Lemma31Sides:
    lhs: float
    rhs: float
    surface_terms: Tuple[float, float]
    j1: float
    j2: float
    j3: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def lemma31_sides(pair: PairConfiguration) -> Lemma31Sides:
    """
    Both sides of the energy inequality between the two bottoms.

    LHS is the energy of phi0 between b0 and the upper bottom envelope plus the
    energy of phi between b and that envelope. RHS is the sum of the surface
    terms on the lower surface envelope and the groups J1 (walls above the
    upper bottom), J2 (walls between each bottom and the envelope) and J3
    (the upper bottom envelope itself).
    """
    phi, phi0 = pair.phi, pair.phi0
    top, bottom = pair.lower_surface, pair.upper_bottom
    lhs = energy(phi0, lower=pair.b0, upper=bottom) + energy(phi, lower=pair.b, upper=bottom)

    surface = graph_piece("lower surface", top, upward=True)
    t, t0 = trace_on_piece(phi, surface), trace_on_piece(phi0, surface)
    surface_terms = (
        boundary_integral(t.normal_derivative, t.value - t0.value, surface),
        boundary_integral(t0.value, t0.normal_derivative - t.normal_derivative, surface),
    )

    walls = wall_piece("walls", bottom, top)
    w, w0 = trace_on_piece(phi, walls), trace_on_piece(phi0, walls)
    j1 = boundary_integral(w.normal_derivative, w.value - w0.value, walls) + boundary_integral(
        w0.value, w0.normal_derivative - w.normal_derivative, walls
    )

    low_wall = wall_piece("walls below, b", pair.b, bottom)
    low_wall0 = wall_piece("walls below, b0", pair.b0, bottom)
    lw = trace_on_piece(phi, low_wall)
    lw0 = trace_on_piece(phi0, low_wall0)
    j2 = boundary_integral(lw.normal_derivative, lw.value, low_wall) + boundary_integral(
        lw0.normal_derivative, lw0.value, low_wall0
    )

    # d_n phi vanishes on b and d_n phi0 on b0, so only nodes where b0 is the upper bottom remain
    floor = graph_piece("upper bottom", bottom, upward=False, mask=pair.b0.values >= pair.b.values)
    f, f0 = trace_on_piece(phi, floor), trace_on_piece(phi0, floor)
    j3 = -2.0 * boundary_integral(f.normal_derivative - f0.normal_derivative, f0.value, floor)

    rhs = surface_terms[0] + surface_terms[1] + j1 + j2 + j3
    return Lemma31Sides(lhs=lhs, rhs=rhs, surface_terms=surface_terms, j1=j1, j2=j2, j3=j3)


def tbot(pair: PairConfiguration) -> float:
    """Contribution of the wall segments between the two bottoms."""
    bottom, top = pair.upper_bottom, pair.lower_surface
    gap = max(
        bottom.values[0] - pair.b.values[0],
        bottom.values[-1] - pair.b.values[-1],
    )
    if gap <= 0.0:
        return 0.0
    total = 0.0
    for phi, own in ((pair.phi, pair.b), (pair.phi0, pair.b0)):
        segment = wall_piece("bottom walls", own, bottom)
        column = wall_piece("walls", own, top)
        flux = piece_l2(trace_on_piece(phi, segment).normal_derivative, segment)
        peak = sup_norm(trace_on_piece(phi, column).value, column.weights != 0)
        total += flux * peak
    return total * math.sqrt(boundary_counting_measure(pair.grid) * gap)


def loglog_value(ratio: float, first: float, second: float, big_c: float, s: float) -> Optional[float]:
    """
    C * first * (ln ln R)^(-s/2) + 3 C * second * (ln ln R)^(-s^2/2), or None when R <= e.
    """
    if not ratio > math.e:
        return None
    if math.isinf(ratio):
        return 0.0
    ll = math.log(math.log(ratio))
    return big_c * first * ll ** (-s / 2.0) + 3.0 * big_c * second * ll ** (-s * s / 2.0)


@dataclass(frozen=True)
class LogTerm:
    value: Optional[float]
    ratio: float
    mode: str

    @property
    def informative(self) -> bool:
        return self.value is not None


def _common_boundary_l2(phi: PotentialField, pair: PairConfiguration) -> float:
    pieces = (
        graph_piece("lower surface", pair.lower_surface, upward=True),
        graph_piece("upper bottom", pair.upper_bottom, upward=False),
        wall_piece("walls", pair.upper_bottom, pair.lower_surface),
    )
    return math.sqrt(sum(piece_l2(trace_on_piece(phi, p).value, p) ** 2 for p in pieces))


def surface_difference_norms(pair: PairConfiguration) -> Tuple[float, float]:
    """L2 norms of phi - phi0 and of its gradient on the lower surface envelope."""
    surface = graph_piece("lower surface", pair.lower_surface, upward=True)
    t, t0 = trace_on_piece(pair.phi, surface), trace_on_piece(pair.phi0, surface)
    value = piece_l2(t.value - t0.value, surface)
    grad = math.sqrt(
        boundary_integral(t.phi_x - t0.phi_x, t.phi_x - t0.phi_x, surface)
        + boundary_integral(t.phi_y - t0.phi_y, t.phi_y - t0.phi_y, surface)
    )
    return value, grad


def tlog(
    pair: PairConfiguration,
    constants: ConfigConstants,
    mode: str = "prop32",
    g_terms: Optional["GTerms"] = None,
) -> LogTerm:
    """
    The log-log term of the estimate.

    In mode "prop32" the smallness quantity is the surface norm of phi - phi0
    and its gradient; in mode "thm46" it is sqrt(G4) + sqrt(G5).

    Raises:
        IdenticalPair: If phi - phi0 vanishes.
        SmallnessViolated: If the smallness precondition fails.
    """
    if pair.is_identical():
        raise IdenticalPair("the two potentials coincide")
    distance = pair.h2_difference
    if mode == "prop32":
        denominator = sum(surface_difference_norms(pair))
    elif mode == "thm46":
        g_terms = g_terms or g2_to_g5(pair)
        denominator = math.sqrt(g_terms.g4) + math.sqrt(g_terms.g5)
    else:
        raise ConfigError(f"unknown log term mode '{mode}'")
    if denominator > distance / (2.0 * constants.small_c):
        raise SmallnessViolated(
            f"{mode}: smallness quantity {denominator:.4g} exceeds "
            f"||phi - phi0||_H2 / 2c = {distance / (2.0 * constants.small_c):.4g}"
        )
    ratio = math.inf if denominator == 0 else distance / denominator
    walls = wall_piece("walls", pair.upper_bottom, pair.lower_surface)
    wall_flux = piece_l2(trace_on_piece(pair.phi, walls).normal_derivative, walls)
    value = loglog_value(
        ratio,
        wall_flux * distance,
        _common_boundary_l2(pair.phi0, pair) * distance,
        constants.big_c,
        constants.s,
    )
    if value is None:
        logger.info("%s log term is non-informative (ratio %.4g <= e)", mode, ratio)
    return LogTerm(value=value, ratio=ratio, mode=mode)


@dataclass(frozen=True)
class G1Terms:
    g1: float
    ghat1: float
    gtilde1: float
    z3: ScalarField


def g1(pair: PairConfiguration) -> G1Terms:
    """Bound on the surface gradient differences of the two potentials."""
    t, t0 = pair.traces, pair.traces0
    dpsi_x = pair.psi.derivative() - pair.psi0.derivative()
    dnd = t.normal_derivative.values - t0.normal_derivative.values
    zeta0_x = pair.zeta0.derivative()
    dzeta_x = sup_norm(zeta0_x - pair.zeta.derivative())
    dy, _ = traces_from_measurements(pair.psi, pair.zeta, t.normal_derivative)
    dy0, _ = traces_from_measurements(pair.psi0, pair.zeta0, t0.normal_derivative)
    z3 = (
        np.abs(t0.normal_derivative.values)
        + np.abs(pair.psi0.derivative())
        + (1.0 + np.abs(zeta0_x)) * np.abs(dy0.values)
    )
    common = 3.0 * _norm(dpsi_x, pair) ** 2
    ghat = common + 3.0 * _norm(dnd, pair) ** 2 + 3.0 * _norm(z3, pair) ** 2 * dzeta_x ** 2
    gtilde = common + 3.0 * sup_norm(zeta0_x) ** 2 * ghat + 3.0 * dy.l2_norm() ** 2 * dzeta_x ** 2
    return G1Terms(g1=max(ghat, gtilde), ghat1=ghat, gtilde1=gtilde, z3=ScalarField(pair.grid, z3))


def lemma42_check(pair: PairConfiguration, terms: Optional[G1Terms] = None) -> Tuple[float, float]:
    """Margins sqrt(G1) - ||d_X phi difference|| and sqrt(G1) - ||d_y phi difference|| on O."""
    terms = terms or g1(pair)
    t, t0 = pair.traces, pair.traces0
    bound = math.sqrt(terms.g1)
    return (
        bound - _norm(t.grad_x_on_surface.values - t0.grad_x_on_surface.values, pair),
        bound - _norm(t.dy_on_surface.values - t0.dy_on_surface.values, pair),
    )


@dataclass(frozen=True)
class CrossTraces:
    """
    Traces of one potential on the other configuration's surface.

    phi is read on zeta0 over S1 (where zeta0 lies below zeta) and phi0 on zeta
    over S2.
    """
    phi_on_zeta0: np.ndarray
    phi_x_on_zeta0: np.ndarray
    phi_y_on_zeta0: np.ndarray
    dn_phi_on_zeta0: np.ndarray
    phi0_on_zeta: np.ndarray
    phi0_x_on_zeta: np.ndarray


def cross_traces(pair: PairConfiguration) -> CrossTraces:
    split = pair.split
    on_zeta0 = trace_on_piece(pair.phi, graph_piece("zeta0 over S1", pair.zeta0, mask=split.s1_mask))
    on_zeta = trace_on_piece(pair.phi0, graph_piece("zeta over S2", pair.zeta, mask=split.s2_mask))
    return CrossTraces(
        phi_on_zeta0=on_zeta0.value,
        phi_x_on_zeta0=on_zeta0.phi_x,
        phi_y_on_zeta0=on_zeta0.phi_y,
        dn_phi_on_zeta0=on_zeta0.normal_derivative,
        phi0_on_zeta=on_zeta.value,
        phi0_x_on_zeta=on_zeta.phi_x,
    )


def lemma41_check(pair: PairConfiguration) -> Tuple[float, float, float]:
    """
    Margins of the three trace-shift inequalities on S1.

    Each compares a trace of phi on zeta against the same trace on zeta0 with
    ||zeta - zeta0||_inf^(1/2) * ||phi||_H2.
    """
    s1 = pair.split.s1_mask
    rhs = math.sqrt(pair.surface_gap) * pair.h2_norms[0]
    if not np.any(s1):
        return rhs, rhs, rhs
    cross = cross_traces(pair)
    t = pair.traces
    lhs = (
        _norm(pair.psi.values - cross.phi_on_zeta0, pair, s1),
        _norm(t.grad_x_on_surface.values - cross.phi_x_on_zeta0, pair, s1),
        _norm(t.dy_on_surface.values - cross.phi_y_on_zeta0, pair, s1),
    )
    return tuple(rhs - value for value in lhs)


@dataclass(frozen=True)
class GTerms:
    g2: float
    g3: float
    g4: float
    g5: float
    z4_norm: float
    z5_norm: float
    z6: float
    z7: float
    g1: G1Terms


def g2_to_g5(pair: PairConfiguration, g1_terms: Optional[G1Terms] = None, cross_mode: str = "direct") -> GTerms:
    """
    Bounds on the surface terms of the energy inequality.

    Args:
        pair (PairConfiguration): The pair.
        g1_terms (G1Terms, optional): Precomputed G1.
        cross_mode (str): "direct" measures the cross-trace norms; "bound"
            replaces them with their upper bounds by norms on O.

    Returns:
        GTerms: G2 to G5 with the coefficients they are built from.
    """
    if cross_mode not in ("direct", "bound"):
        raise ConfigError(f"unknown cross-trace mode '{cross_mode}'")
    g1_terms = g1_terms or g1(pair)
    s1, s2 = pair.split.s1_mask, pair.split.s2_mask
    h2, h20 = pair.h2_norms
    dz = pair.surface_gap
    root_dz = math.sqrt(dz)
    t, t0 = pair.traces, pair.traces0
    zeta_x, zeta0_x = pair.zeta.derivative(), pair.zeta0.derivative()
    metric, metric0 = np.sqrt(1.0 + zeta_x ** 2), np.sqrt(1.0 + zeta0_x ** 2)

    psi0_norm = pair.psi0.l2_norm()
    dpsi = _norm(pair.psi.values - pair.psi0.values, pair)
    dnd = _norm(t.normal_derivative.values - t0.normal_derivative.values, pair)
    z5_norm = _norm(metric * t.normal_derivative.values, pair)
    z7 = max(float(np.max(metric)), float(np.max(metric0)))
    grad_x_norm = t.grad_x_on_surface.l2_norm()

    if cross_mode == "direct":
        cross = cross_traces(pair)
        z4_norm = _norm(metric0 * cross.dn_phi_on_zeta0, pair, s1)
        phi0_on_zeta = _norm(cross.phi0_on_zeta, pair, s2)
        phi0_on_zeta_slope = _norm(cross.phi0_on_zeta * zeta0_x, pair, s2)
        phi0_x_on_zeta = _norm(cross.phi0_x_on_zeta, pair, s2)
        dn_phi_on_zeta0 = _norm(cross.dn_phi_on_zeta0, pair, s1)
    else:
        phi0_on_zeta = h20 * root_dz + psi0_norm
        phi0_on_zeta_slope = sup_norm(zeta0_x) * phi0_on_zeta
        phi0_x_on_zeta = h20 * root_dz + t0.grad_x_on_surface.l2_norm()
        dn_phi_on_zeta0 = 2.0 * h2 * root_dz + grad_x_norm + t.dy_on_surface.l2_norm()
        z4_norm = float(np.max(metric0)) * dn_phi_on_zeta0

    g2 = (z4_norm * h2 + z5_norm * h20) * root_dz + (z4_norm + z5_norm) * dpsi

    z6 = phi0_on_zeta * (phi0_x_on_zeta + t0.normal_derivative.l2_norm()) + psi0_norm * (
        grad_x_norm + dn_phi_on_zeta0
    )
    dzeta_x = sup_norm(zeta_x - zeta0_x)
    g3 = (
        z7 * (psi0_norm + phi0_on_zeta) * dnd
        + z7 * (
            (psi0_norm + _norm(pair.psi0.values * zeta0_x, pair)) * h2
            + (phi0_on_zeta + phi0_on_zeta_slope) * h20
        ) * root_dz
        + z7 * z6 * dzeta_x
    )
    sobolev = h2 ** 2 + h20 ** 2
    g4 = z7 * (4.0 * dpsi ** 2 + 2.0 * sobolev * dz)
    g5 = 4.0 * z7 * sobolev * dz + 8.0 * z7 * g1_terms.g1
    return GTerms(g2=g2, g3=g3, g4=g4, g5=g5, z4_norm=z4_norm, z5_norm=z5_norm, z6=z6, z7=z7, g1=g1_terms)


def prop43_check(pair: PairConfiguration, g_terms: Optional[GTerms] = None) -> Tuple[float, float, float, float]:
    """Margins of the four surface-term inequalities bounded by G2, G3, sqrt(G4) and sqrt(G5)."""
    g_terms = g_terms or g2_to_g5(pair)
    sides = lemma31_sides(pair)
    value, grad = surface_difference_norms(pair)
    return (
        g_terms.g2 - sides.surface_terms[0],
        g_terms.g3 - sides.surface_terms[1],
        math.sqrt(g_terms.g4) - value,
        math.sqrt(g_terms.g5) - grad,
    )


def distance_to_boundary(phi: PotentialField, x: float, y: float, refine: int = 4) -> float:
    grid = phi.grid
    nodes = grid.nodes
    xs = np.linspace(nodes[0], nodes[-1], refine * (grid.n_nodes - 1) + 1)
    best = min(x - nodes[0], nodes[-1] - x)
    for curve in (phi.domain.bottom.values, phi.domain.surface.values):
        ys = np.interp(xs, nodes, curve)
        best = min(best, float(np.min(np.hypot(xs - x, ys - y))))
    return best


def ball_energy(phi: PotentialField, x: float, y: float, rho: float, n_radial: int = 8, n_angular: int = 48) -> float:
    """Energy of phi on the disk of radius rho around (x, y), polar Gauss quadrature."""
    nodes, weights = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * rho * (nodes + 1.0)
    wr = 0.5 * rho * weights * r
    angles = 2.0 * math.pi * np.arange(n_angular) / n_angular
    px = x + r[:, None] * np.cos(angles)[None, :]
    py = y + r[:, None] * np.sin(angles)[None, :]
    density = phi.sample(px, py, phi.energy_density)
    return float(np.sum(wr[:, None] * density) * 2.0 * math.pi / n_angular)


def estimate_crho(phi: PotentialField, rho: float, sample_points: Sequence[Tuple[float, float]]) -> float:
    """
    Smallest fraction of the total energy found in a disk of radius rho.

    Raises:
        ZeroEnergy: If phi carries no energy.
        PointTooNearBoundary: If a point is within 4 rho of the boundary.
    """
    total = energy(phi)
    if total <= 1e-300:
        raise ZeroEnergy("potential has zero Dirichlet energy")
    ratios = []
    for x, y in sample_points:
        if distance_to_boundary(phi, x, y) <= 4.0 * rho:
            raise PointTooNearBoundary(f"point ({x:.4g}, {y:.4g}) is within 4*rho={4 * rho:.4g} of the boundary")
        ratios.append(ball_energy(phi, x, y, rho) / total)
    return min(ratios)


def _square_energy(phi: PotentialField, x0: float, y0: float, side: float, order: int = 4) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    pts = 0.5 * side * (nodes + 1.0)
    w = 0.5 * side * weights
    px, py = np.meshgrid(x0 + pts, y0 + pts, indexing="ij")
    density = phi.sample(px, py, phi.energy_density)
    return float(np.sum(w[:, None] * w[None, :] * density))


def cover_component(
    component: Component, phi: PotentialField, ceiling: Optional[ScalarField] = None
) -> schemas.ComponentCoverage:
    """
    Cover the eroded core of a component by squares of side rho/2.

    The component constant is 2^d C / rho^(d+1), where C is the energy fraction
    of the disk of radius rho/4 centred in the lowest-energy square.
    """
    coverage = schemas.ComponentCoverage(**component.to_report())
    if not component.fat:
        return coverage
    raster = rasterize_component(component, ceiling=ceiling)
    side = 0.5 * component.rho
    core = raster.mask & (raster.distance > component.rho)
    ix, iy = np.nonzero(core)
    if ix.size == 0:
        return coverage
    x_origin = raster.x_centers[0] - 0.5 * raster.pixel
    y_origin = raster.y_centers[0] - 0.5 * raster.pixel
    cells = set(zip(
        np.floor((raster.x_centers[ix] - x_origin) / side).astype(int).tolist(),
        np.floor((raster.y_centers[iy] - y_origin) / side).astype(int).tolist(),
    ))
    energies = {
        cell: _square_energy(phi, x_origin + cell[0] * side, y_origin + cell[1] * side, side)
        for cell in sorted(cells)
    }
    lowest = min(energies, key=energies.get)
    cx = x_origin + (lowest[0] + 0.5) * side
    cy = y_origin + (lowest[1] + 0.5) * side
    radius = 0.5 * side
    try:
        crho = estimate_crho(phi, radius, [(cx, cy)])
    except PointTooNearBoundary:
        logger.warning("square centre (%.4g, %.4g) is close to the boundary; using its disk anyway", cx, cy)
        crho = ball_energy(phi, cx, cy, radius) / energy(phi)
    constant = 2 ** SPATIAL_DIM * crho / component.rho ** (SPATIAL_DIM + 1)
    return coverage.copy(update={
        "n_squares": len(energies),
        "min_square_energy": energies[lowest],
        "crho": crho,
        "constant": constant,
    })


def _combine(constants: List[float]) -> float:
    low, high = min(constants), max(constants)
    if low > 0 and high / low <= CASE_SPREAD:
        return low
    return min(low, low * low)


def estimate_cbot(pair: PairConfiguration) -> Tuple[float, List[schemas.ComponentCoverage]]:
    """
    Size-estimate constant C_bot of the bottom difference.

    '+' components lie in the b0 fluid and are covered with phi0, '-'
    components with phi. Each side combines its component constants (uniform
    minimum, or squared minimum when they spread by more than 1e3) and C_bot
    is the smaller side value.

    Raises:
        NoComponents: If the bottoms coincide.
    """
    decomposition = pair.decomposition
    if not decomposition.components:
        raise NoComponents("the two bottoms coincide; there is nothing to cover")
    report = []
    sides = []
    for sign, phi in ((1, pair.phi0), (-1, pair.phi)):
        coverage = [cover_component(c, phi, pair.lower_surface) for c in decomposition.by_sign(sign)]
        if coverage:
            sides.append(_combine([c.constant for c in coverage]))
            report.extend(coverage)
    return min(sides), report


def _verdict(lhs: float, rhs: float) -> Verdict:
    tol = 1e-9 * max(1.0, abs(rhs))
    return Verdict.HOLDS if lhs <= rhs + tol else Verdict.VIOLATED


def theorem46_report(
    pair: PairConfiguration,
    constants: ConfigConstants,
    cross_mode: str = "direct",
    seed: Optional[int] = None,
    generator: Optional[str] = None,
) -> schemas.CertificateReport:
    """
    Assemble the stability bound C_bot ||b - b0||_L1 <= (G2 + G3 + Tlog1 + Tbot) / min energy.

    The verdict is NON_INFORMATIVE when the log-log term is vacuous or its
    smallness precondition fails; the right side is then reported without it.
    It is also NON_INFORMATIVE when a component fails the fatness condition or
    its eroded core is empty, since C_bot is then 0 and the bound says nothing.

    Raises:
        IdenticalPair: If the two potentials coincide.
        ZeroEnergy: If either potential carries no energy.
    """
    if pair.is_identical():
        raise IdenticalPair("the two configurations coincide")
    notes = []
    sides = lemma31_sides(pair)
    bottom_term = tbot(pair)
    g1_terms = g1(pair)
    g_terms = g2_to_g5(pair, g1_terms, cross_mode)

    smallness = {}
    log_terms = {}
    for mode in ("prop32", "thm46"):
        try:
            log_terms[mode] = tlog(pair, constants, mode, g_terms)
            smallness[mode] = True
        except SmallnessViolated as exc:
            log_terms[mode] = None
            smallness[mode] = False
            notes.append(exc.detail)
    tlog_value = log_terms["prop32"].value if log_terms["prop32"] else None
    tlog1_value = log_terms["thm46"].value if log_terms["thm46"] else None

    try:
        cbot, components = estimate_cbot(pair)
    except NoComponents as exc:
        cbot, components = None, []
        notes.append(exc.detail)

    energies = pair.energies
    scale = min(energies)
    if scale <= 1e-300:
        raise ZeroEnergy("one of the potentials carries no energy")
    numerator = g_terms.g2 + g_terms.g3 + bottom_term + (tlog1_value or 0.0)
    rhs = numerator / scale
    l1 = pair.l1_distance
    lhs = (cbot or 0.0) * l1
    uncovered = [c for c in components if c.constant <= 0.0]
    for c in uncovered:
        reason = "is not fat" if not c.fat else "has an empty eroded core"
        notes.append(f"{c.sign} component on [{c.x_start:.4g}, {c.x_end:.4g}] {reason} (rho={c.rho:.3g}); no size estimate")

    if tlog1_value is None or uncovered:
        verdict = Verdict.NON_INFORMATIVE
        if tlog1_value is None and smallness["thm46"]:
            notes.append("log-log term is vacuous (ratio <= e)")
    else:
        verdict = _verdict(lhs, rhs)
    if verdict is Verdict.VIOLATED:
        logger.warning("bound violated: lhs %.6g > rhs %.6g", lhs, rhs)

    terms = schemas.TermBreakdown(
        lhs_energy=sides.lhs,
        lemma31_rhs=sides.rhs,
        j1=sides.j1,
        j2=sides.j2,
        j3=sides.j3,
        surface_terms=list(sides.surface_terms),
        tbot=bottom_term,
        tlog=tlog_value,
        tlog1=tlog1_value,
        g1=g1_terms.g1,
        ghat1=g1_terms.ghat1,
        gtilde1=g1_terms.gtilde1,
        g2=g_terms.g2,
        g3=g_terms.g3,
        g4=g_terms.g4,
        g5=g_terms.g5,
        z3_norm=g1_terms.z3.l2_norm(),
        z4_norm=g_terms.z4_norm,
        z5_norm=g_terms.z5_norm,
        z6=g_terms.z6,
        z7=g_terms.z7,
        cbot_estimate=cbot,
        crho_estimates=[c.crho for c in components if c.crho is not None],
        final_rhs=rhs,
    )
    grid = pair.grid
    return schemas.CertificateReport(
        verdict=verdict,
        lhs=lhs,
        rhs=rhs,
        l1_distance=l1,
        h2_distance=pair.h2_difference,
        energies=list(energies),
        terms=terms,
        constants=constants.as_dict(),
        grid={"a1": grid.a1, "a2": grid.a2, "n_nodes": grid.n_nodes, "n_sigma": pair.phi.sigma_map.n_sigma},
        components=components,
        smallness=smallness,
        covered=not uncovered,
        notes=notes,
        seed=seed,
        generator=generator,
    )
