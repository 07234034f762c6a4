"""
Forward free-surface dynamics in the surface variables (zeta, psi).

    d_t zeta = G(zeta, b) psi
    d_t psi  = -g zeta - |psi'|^2 / 2 + (G psi + zeta' psi')^2 / (2 (1 + zeta'^2))

integrated with classical RK4 on a periodic mother grid. measure() restricts a
saved state to a window and exports the wall traces of the mother potential,
which is what the truncated solves downstream need.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from bathy.elliptic import (
    DEFAULT_N_SIGMA,
    LateralTrace,
    SolverSettings,
    dno_from_field,
    solve_potential,
)
from bathy.exceptions import (
    ConfigError,
    SolverDivergence,
    TimeOutOfRange,
    WindowOutsideDomain,
)
from bathy.geometry import Grid1D, ScalarField, build_domain, check_same_grid

logger = logging.getLogger(__name__)

# a periodic mother one window long would identify the two walls
MIN_MOTHER_FACTOR = 2


def check_mother_factor(factor: int) -> None:
    if int(factor) != factor or factor < MIN_MOTHER_FACTOR:
        raise WindowOutsideDomain(
            f"mother_domain_factor must be an integer of at least {MIN_MOTHER_FACTOR} to hold the window, got {factor}"
        )


@dataclass(frozen=True)
class SimConfig:
    """
    Time integration settings.

    Attributes:
        dt (float): Time step, seconds.
        t_end (float): Final time, seconds.
        g (float): Gravitational acceleration.
        h0 (float): Depth floor monitored at every stage.
        lateral_policy (str): Only "periodic" is supported.
        mother_domain_factor (int): Mother domain length over window length.
        n_sigma (int): Vertical layers of the potential solves.
        solver (SolverSettings): Linear solver settings.
    """
    dt: float
    t_end: float
    g: float = 9.81
    h0: float = 0.05
    lateral_policy: str = "periodic"
    mother_domain_factor: int = MIN_MOTHER_FACTOR
    n_sigma: int = DEFAULT_N_SIGMA
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"time step must be positive, got dt={self.dt}")
        if self.t_end < self.dt:
            raise ConfigError(f"t_end={self.t_end} is shorter than one step dt={self.dt}")
        if self.lateral_policy != "periodic":
            raise ConfigError(f"unsupported lateral policy '{self.lateral_policy}'")
        check_mother_factor(self.mother_domain_factor)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class WaveState:
    zeta: ScalarField
    psi: ScalarField
    t: float = 0.0

    def __post_init__(self):
        check_same_grid(self.zeta, self.psi)

    @property
    def grid(self) -> Grid1D:
        return self.zeta.grid


@dataclass(frozen=True)
class MeasurementTuple:
    """
    Surface data on the window at one instant.

    Attributes:
        zeta (ScalarField): Elevation on O.
        dt_zeta (ScalarField): Time derivative of the elevation on O.
        psi (ScalarField): Surface potential on O.
        b_left (float): Bottom at a1.
        b_right (float): Bottom at a2.
        t0 (float): Time of the saved state used.
        theta (LateralTrace | None): Wall traces of the mother potential.
    """
    zeta: ScalarField
    dt_zeta: ScalarField
    psi: ScalarField
    b_left: float
    b_right: float
    t0: float
    theta: Optional[LateralTrace] = None

    def __post_init__(self):
        check_same_grid(self.zeta, self.dt_zeta, self.psi)

    @property
    def grid(self) -> Grid1D:
        return self.zeta.grid


def rhs(state: WaveState, b: ScalarField, config: SimConfig) -> Tuple[ScalarField, ScalarField]:
    """
    Right-hand side of the surface evolution equations.

    Raises:
        DepthViolation: If zeta - b drops below config.h0.
        SolverDivergence: If the potential solve fails.
    """
    domain = build_domain(b, state.zeta, config.h0)
    phi = solve_potential(domain, state.psi, None, config.n_sigma, config.solver)
    g_psi = dno_from_field(phi).values
    zeta_x = state.zeta.derivative()
    psi_x = state.psi.derivative()
    dt_psi = (
        -config.g * state.zeta.values
        - 0.5 * psi_x ** 2
        + (g_psi + zeta_x * psi_x) ** 2 / (2.0 * (1.0 + zeta_x ** 2))
    )
    dt_zeta = g_psi
    if state.grid.periodic:
        # no net flux through a periodic surface; the discrete mean of G psi is O(h^2)
        dt_zeta = g_psi - float(np.mean(g_psi))
    return ScalarField(state.grid, dt_zeta), ScalarField(state.grid, dt_psi)


def _shifted(state: WaveState, k: Tuple[ScalarField, ScalarField], factor: float) -> WaveState:
    return WaveState(
        state.zeta.with_values(state.zeta.values + factor * k[0].values),
        state.psi.with_values(state.psi.values + factor * k[1].values),
        state.t + factor,
    )


def step_rk4(state: WaveState, b: ScalarField, config: SimConfig) -> WaveState:
    dt = config.dt
    k1 = rhs(state, b, config)
    k2 = rhs(_shifted(state, k1, 0.5 * dt), b, config)
    k3 = rhs(_shifted(state, k2, 0.5 * dt), b, config)
    k4 = rhs(_shifted(state, k3, dt), b, config)
    zeta = state.zeta.values + dt / 6.0 * (k1[0].values + 2 * k2[0].values + 2 * k3[0].values + k4[0].values)
    psi = state.psi.values + dt / 6.0 * (k1[1].values + 2 * k2[1].values + 2 * k3[1].values + k4[1].values)
    if not (np.all(np.isfinite(zeta)) and np.all(np.isfinite(psi))):
        raise SolverDivergence(f"non-finite surface state at t={state.t + dt:.6g}")
    return WaveState(state.zeta.with_values(zeta), state.psi.with_values(psi), state.t + dt)


def simulate(
    init: WaveState,
    b: ScalarField,
    config: SimConfig,
    on_step: Optional[Callable[[WaveState], None]] = None,
) -> List[WaveState]:
    """
    Integrate from init to config.t_end, keeping every step.

    Args:
        init (WaveState): Initial surface state on a periodic grid.
        b (ScalarField): Bottom on the same grid.
        config (SimConfig): Time integration settings.
        on_step (callable, optional): Called with each new state.

    Returns:
        list: States at t0, t0 + dt, ..., including the initial one.
    """
    check_same_grid(init.zeta, b)
    if not init.grid.periodic:
        raise ConfigError("simulation needs a periodic mother grid")
    trajectory = [init]
    state = init
    for n in range(config.n_steps):
        state = step_rk4(state, b, config)
        trajectory.append(state)
        if on_step is not None:
            on_step(state)
        if (n + 1) % 100 == 0:
            logger.info("step %d/%d, t=%.4f", n + 1, config.n_steps, state.t)
    return trajectory


def window_slice(mother: Grid1D, window: Grid1D) -> slice:
    """
    Node range of the mother grid covered by the window.

    Raises:
        WindowOutsideDomain: If the window is not a node-aligned subset.
    """
    if window.periodic or abs(window.spacing - mother.spacing) > 1e-9 * mother.spacing:
        raise WindowOutsideDomain(
            f"window spacing {window.spacing:.6g} does not match mother spacing {mother.spacing:.6g}"
        )
    start = mother.index_of(window.a1)
    if start is None or start + window.n_nodes > mother.n_nodes:
        raise WindowOutsideDomain(f"window [{window.a1}, {window.a2}] is not inside the mother grid")
    return slice(start, start + window.n_nodes)


def nearest_state(trajectory: List[WaveState], t0: float) -> WaveState:
    times = np.array([s.t for s in trajectory])
    half_step = 0.5 * (times[1] - times[0]) if len(times) > 1 else 0.0
    if t0 < times[0] - half_step or t0 > times[-1] + half_step:
        raise TimeOutOfRange(f"t0={t0} is outside the trajectory span [{times[0]}, {times[-1]}]")
    return trajectory[int(np.argmin(np.abs(times - t0)))]


def measure(
    trajectory: List[WaveState],
    t0: float,
    b: ScalarField,
    window: Grid1D,
    config: Optional[SimConfig] = None,
) -> MeasurementTuple:
    """
    Surface data on a window at the saved step nearest t0.

    Raises:
        TimeOutOfRange: If t0 is not covered by the trajectory.
        WindowOutsideDomain: If the window is not node-aligned inside the mother grid.
    """
    state = nearest_state(trajectory, t0)
    cut = window_slice(state.grid, window)
    if config is None:
        h0 = 0.5 * float(np.min(state.zeta.values - b.values))
        n_sigma, settings = DEFAULT_N_SIGMA, SolverSettings()
    else:
        h0, n_sigma, settings = config.h0, config.n_sigma, config.solver
    phi = solve_potential(build_domain(b, state.zeta, h0), state.psi, None, n_sigma, settings)
    g_psi = dno_from_field(phi)
    theta = LateralTrace(phi.values[cut.start], phi.values[cut.stop - 1])
    return MeasurementTuple(
        zeta=ScalarField(window, state.zeta.values[cut]),
        dt_zeta=ScalarField(window, g_psi.values[cut]),
        psi=ScalarField(window, state.psi.values[cut]),
        b_left=float(b.values[cut.start]),
        b_right=float(b.values[cut.stop - 1]),
        t0=state.t,
        theta=theta,
    )


def mother_grid(window: Grid1D, factor: int, offset_nodes: Optional[int] = None) -> Grid1D:
    """
    Periodic grid, factor window lengths long, with the window's spacing.

    The window starts offset_nodes nodes after the mother's left end; by
    default it sits in the middle.
    """
    check_mother_factor(factor)
    n_mother = factor * (window.n_nodes - 1)
    if offset_nodes is None:
        offset_nodes = (n_mother - window.n_nodes) // 2
    if offset_nodes < 0 or offset_nodes + window.n_nodes > n_mother:
        raise WindowOutsideDomain(f"offset {offset_nodes} puts the window outside the mother grid")
    start = window.a1 - offset_nodes * window.spacing
    return Grid1D(start, start + factor * window.length, n_mother, periodic=True)
