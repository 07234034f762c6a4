"""
Bottom reconstruction from one surface measurement.

The objective is the kinematic residual of the measured data,

    J(b) = 1/2 ||G(zeta, b) psi - dt_zeta||^2 + alpha/2 ||b'||^2     (L2 over O)

minimised over the interior bottom nodes with a projected limited-memory BFGS
iteration. Gradients come from the discrete adjoint of the sigma solve; the
derivative of the assembled operator with respect to the bottom is taken by
complex-step differentiation of assemble_system, seven colour classes at a time.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse.linalg as spla

from bathy.elliptic import (
    DEFAULT_N_SIGMA,
    LateralTrace,
    SolverSettings,
    assemble_system,
    dno_from_field,
    solve_potential,
    top_sigma_derivative,
)
from bathy.exceptions import (
    ConfigError,
    InfeasibleInitialGuess,
    LineSearchFailure,
    SolverDivergence,
)
from bathy.geometry import ScalarField, build_domain, check_same_grid, grid_derivative, zero_threshold
from bathy.sampling import make_rng
from bathy.waves import MeasurementTuple

logger = logging.getLogger(__name__)

# a bottom node enters rows at most three columns away, so seven colours never overlap
COLOUR_STRIDE = 7
COMPLEX_STEP = 1e-20
ARMIJO = 1e-4
MAX_BACKTRACKS = 30


@dataclass(frozen=True)
class InversionOptions:
    """
    Settings of the reconstruction.

    Attributes:
        alpha_reg (float): Weight of the gradient penalty on b.
        max_iters (int): Iteration cap.
        grad_tol (float): Stop when the sup norm of the gradient drops below it.
        ftol (float): Stop when an accepted step lowers the misfit by at most
            ftol times its value. Zero stops only on a step that makes no progress.
        step_init (float): Sup-norm length of the first trial step.
        fd_step (float): Step of the finite-difference gradient check.
        depth_floor (float): Minimum admissible depth zeta - b.
        memory (int): Number of stored curvature pairs.
        n_sigma (int): Vertical layers of the forward solves.
        solver (SolverSettings): Linear solver of the misfit evaluations.
    """
    alpha_reg: float = 1e-6
    max_iters: int = 200
    grad_tol: float = 1e-10
    ftol: float = 0.0
    step_init: float = 0.02
    fd_step: float = 1e-6
    depth_floor: float = 0.1
    memory: int = 10
    n_sigma: int = DEFAULT_N_SIGMA
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.alpha_reg < 0:
            raise ConfigError("alpha_reg must be non-negative")
        for name in ("grad_tol", "step_init", "fd_step", "depth_floor"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.ftol < 0 or self.max_iters < 0 or self.memory < 1:
            raise ConfigError("ftol, max_iters must be non-negative and memory at least 1")


@dataclass
class InversionResult:
    b_est: ScalarField
    misfit_history: List[float]
    converged: bool
    iterations: int
    identifiable: bool
    stop_reason: str
    l1_error_vs_truth: Optional[float] = None
    iterates: List[np.ndarray] = field(default_factory=list, repr=False)

    def to_report(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "misfit_history": list(self.misfit_history),
            "l1_error": self.l1_error_vs_truth,
            "identifiable": self.identifiable,
            "stop_reason": self.stop_reason,
        }


def l1_error(b1: ScalarField, b2: ScalarField) -> float:
    """Trapezoid quadrature of |b1 - b2| over the window."""
    grid = check_same_grid(b1, b2)
    return float(np.sum(grid.weights() * np.abs(b1.values - b2.values)))


def is_identifiable(m: MeasurementTuple) -> bool:
    """False when psi is constant on the window, where no bottom can be told apart."""
    return m.psi.max_abs() > 0 and float(np.ptp(m.psi.values)) > zero_threshold(m.psi)


def _theta(m: MeasurementTuple, theta: Optional[LateralTrace], n_sigma: int) -> LateralTrace:
    theta = theta if theta is not None else m.theta
    if theta is None:
        theta = LateralTrace.constant(n_sigma, m.psi.values[0], m.psi.values[-1])
    return theta


def _domain(b: ScalarField, m: MeasurementTuple, opts: InversionOptions):
    # projected iterates sit exactly on the floor
    return build_domain(b, m.zeta, opts.depth_floor * (1.0 - 1e-9))


def derivative_matrix(grid) -> np.ndarray:
    """Dense matrix D with D @ b equal to the grid derivative of b."""
    return grid_derivative(np.eye(grid.n_nodes), grid)


def data_residual(b: ScalarField, m: MeasurementTuple, theta: Optional[LateralTrace], opts: InversionOptions) -> ScalarField:
    """G(zeta, b) psi - dt_zeta on the window."""
    check_same_grid(b, m.zeta)
    theta = _theta(m, theta, opts.n_sigma)
    phi = solve_potential(_domain(b, m, opts), m.psi, theta, theta.n_sigma, opts.solver)
    return ScalarField(b.grid, dno_from_field(phi).values - m.dt_zeta.values)


def _regularization(b: ScalarField, alpha: float) -> float:
    if alpha == 0:
        return 0.0
    return 0.5 * alpha * float(np.sum(b.grid.weights() * b.derivative() ** 2))


def misfit(b_candidate: ScalarField, m: MeasurementTuple, theta: Optional[LateralTrace], opts: InversionOptions) -> float:
    """
    Half the squared L2 data residual plus the gradient penalty.

    Raises:
        DepthViolation: If the candidate leaves less than opts.depth_floor of water.
        SolverDivergence: If the forward solve fails.
    """
    r = data_residual(b_candidate, m, theta, opts)
    return 0.5 * float(np.sum(b_candidate.grid.weights() * r.values ** 2)) + _regularization(b_candidate, opts.alpha_reg)


def _colour_owner(columns: np.ndarray, colour: int, n_nodes: int) -> np.ndarray:
    offset = (colour - columns) % COLOUR_STRIDE
    owner = columns + np.where(offset <= COLOUR_STRIDE // 2, offset, offset - COLOUR_STRIDE)
    return np.where((owner >= 0) & (owner < n_nodes), owner, -1)


def value_and_gradient(
    b_candidate: ScalarField, m: MeasurementTuple, theta: Optional[LateralTrace], opts: InversionOptions
) -> Tuple[float, ScalarField]:
    """
    Misfit and its adjoint gradient with respect to the bottom nodes.

    One LU factorisation serves the forward and the transposed solve. The
    endpoint components are zero since b is pinned there.
    """
    grid = check_same_grid(b_candidate, m.zeta)
    domain = _domain(b_candidate, m, opts)
    theta = _theta(m, theta, opts.n_sigma)
    n, n_sigma = grid.n_nodes, theta.n_sigma
    sigma = np.linspace(0.0, 1.0, n_sigma)
    d_sigma = sigma[1] - sigma[0]
    b, zeta = b_candidate.values, m.zeta.values

    a, f = assemble_system(grid, sigma, b, zeta, m.psi.values, theta)
    lu = spla.splu(a.tocsc())
    u = lu.solve(f)
    if not np.all(np.isfinite(u)):
        raise SolverDivergence("forward solve of the misfit produced non-finite values")
    values = u.reshape(n, n_sigma)

    weights = grid.weights()
    depth = domain.depth
    zeta_x = m.zeta.derivative()
    metric = 1.0 + zeta_x ** 2
    u_s = top_sigma_derivative(values, d_sigma)
    g_psi = metric * u_s / depth - zeta_x * m.psi.derivative()
    r = g_psi - m.dt_zeta.values
    d = derivative_matrix(grid)
    slope = d @ b
    value = 0.5 * float(np.sum(weights * r ** 2)) + 0.5 * opts.alpha_reg * float(np.sum(weights * slope ** 2))

    # dJ/du only touches the three top layers through u_sigma
    coeff = weights * r * metric / depth / (2.0 * d_sigma)
    dj_du = np.zeros((n, n_sigma))
    dj_du[:, -1] = 3.0 * coeff
    dj_du[:, -2] = -4.0 * coeff
    dj_du[:, -3] = coeff
    adjoint = lu.solve(dj_du.ravel(), trans="T")

    grad = weights * r * metric * u_s / depth ** 2
    grad = grad + opts.alpha_reg * d.T @ (weights * slope)
    rows_column = np.repeat(np.arange(n), n_sigma)
    for colour in range(COLOUR_STRIDE):
        bump = np.zeros(n)
        bump[colour::COLOUR_STRIDE] = 1.0
        a_c, _ = assemble_system(grid, sigma, b + 1j * COMPLEX_STEP * bump, zeta, m.psi.values, theta)
        d_residual = (a_c @ u).imag / COMPLEX_STEP
        owner = _colour_owner(rows_column, colour, n)
        active = owner >= 0
        grad -= np.bincount(owner[active], weights=adjoint[active] * d_residual[active], minlength=n)
    grad[0] = grad[-1] = 0.0
    return value, ScalarField(grid, grad)


def gradient(b_candidate: ScalarField, m: MeasurementTuple, theta: Optional[LateralTrace], opts: InversionOptions) -> ScalarField:
    return value_and_gradient(b_candidate, m, theta, opts)[1]


def gradient_check(
    b_candidate: ScalarField,
    m: MeasurementTuple,
    theta: Optional[LateralTrace],
    opts: InversionOptions,
    nodes: Sequence[int],
) -> float:
    """
    Worst relative disagreement between the adjoint gradient and central differences.

    Args:
        nodes (sequence of int): Interior nodes to check.

    Returns:
        float: max over nodes of |adjoint - fd| / max(|fd|, scale), with scale
        1e-8 times the gradient's sup norm.
    """
    adjoint = gradient(b_candidate, m, theta, opts).values
    scale = 1e-8 * max(float(np.max(np.abs(adjoint))), 1e-30)
    worst = 0.0
    for k in nodes:
        step = np.zeros(b_candidate.grid.n_nodes)
        step[k] = opts.fd_step
        plus = misfit(b_candidate.with_values(b_candidate.values + step), m, theta, opts)
        minus = misfit(b_candidate.with_values(b_candidate.values - step), m, theta, opts)
        fd = (plus - minus) / (2.0 * opts.fd_step)
        error = abs(adjoint[k] - fd) / max(abs(fd), scale)
        logger.debug("node %d: adjoint %.6e, fd %.6e, rel %.2e", k, adjoint[k], fd, error)
        worst = max(worst, error)
    return worst


def add_noise(m: MeasurementTuple, level: float, rng: np.random.Generator) -> MeasurementTuple:
    """Perturb dt_zeta by level * rms(dt_zeta) * N(0, 1) per node."""
    rms = float(np.sqrt(np.mean(m.dt_zeta.values ** 2)))
    noise = level * rms * rng.standard_normal(m.grid.n_nodes)
    return replace(m, dt_zeta=m.dt_zeta.with_values(m.dt_zeta.values + noise))


def noise_sweep(
    m: MeasurementTuple,
    b_init: ScalarField,
    opts: InversionOptions,
    levels: Sequence[float],
    seed: int = 0,
    b_true: Optional[ScalarField] = None,
) -> List[InversionResult]:
    """
    Invert the data perturbed at each level, in increasing order.

    Every level scales the same standard normal draw, so the errors differ
    only through the noise amplitude.
    """
    return [invert(add_noise(m, level, make_rng(seed)), None, b_init, opts, b_true) for level in sorted(levels)]


class ProjectedBFGS:
    """
    Limited-memory BFGS with projection onto the admissible bottoms.

    Admissible means b <= zeta - depth_floor at every node and b equal to the
    measured endpoint values. The line search is a projected Armijo
    backtracking on the step actually taken after projection.
    """

    def __init__(self, ceiling: np.ndarray, b_left: float, b_right: float, opts: InversionOptions):
        self.ceiling = ceiling
        self.b_left = b_left
        self.b_right = b_right
        self.opts = opts
        self._s = deque(maxlen=opts.memory)
        self._y = deque(maxlen=opts.memory)

    def projection(self, x: np.ndarray) -> np.ndarray:
        x = np.minimum(x, self.ceiling)
        x[0], x[-1] = self.b_left, self.b_right
        return x

    def remember(self, s: np.ndarray, y: np.ndarray) -> bool:
        if float(np.dot(y, s)) <= 1e-300:
            logger.debug("skipping curvature pair with y.s <= 0")
            return False
        self._s.append(s)
        self._y.append(y)
        return True

    def find_search_direction(self, g: np.ndarray) -> np.ndarray:
        """Two-loop recursion, scaled by the latest pair's curvature."""
        q = -g.copy()
        if not self._s:
            return self.opts.step_init * q / max(float(np.max(np.abs(g))), 1e-300)
        alphas = []
        for s, y in zip(reversed(self._s), reversed(self._y)):
            rho = 1.0 / float(np.dot(y, s))
            alpha = rho * float(np.dot(s, q))
            q -= alpha * y
            alphas.append((rho, alpha, s, y))
        s, y = self._s[-1], self._y[-1]
        q *= float(np.dot(s, y)) / float(np.dot(y, y))
        for rho, alpha, s, y in reversed(alphas):
            beta = rho * float(np.dot(y, q))
            q += (alpha - beta) * s
        return q

    def line_search(
        self, x: np.ndarray, f: float, g: np.ndarray, p: np.ndarray, evaluate: Callable[[np.ndarray], float]
    ) -> Tuple[Optional[np.ndarray], float]:
        t = 1.0
        for _ in range(MAX_BACKTRACKS):
            xt = self.projection(x + t * p)
            ft = evaluate(xt)
            descent = float(np.dot(g, xt - x))
            if ft <= f + ARMIJO * min(descent, 0.0) and ft <= f:
                return xt, ft
            t *= 0.5
        return None, f


def invert(
    m: MeasurementTuple,
    theta: Optional[LateralTrace],
    b_init: ScalarField,
    opts: InversionOptions,
    b_true: Optional[ScalarField] = None,
) -> InversionResult:
    """
    Reconstruct the bottom from a measurement.

    Args:
        m (MeasurementTuple): Surface data on the window.
        theta (LateralTrace, optional): Wall traces; defaults to m.theta, then
            to the constant continuation of psi.
        b_init (ScalarField): Starting bottom. Its endpoints are replaced by
            the measured ones.
        opts (InversionOptions): Settings.
        b_true (ScalarField, optional): Reference bottom for the L1 error.

    Returns:
        InversionResult: The last accepted iterate and its history.

    Raises:
        InfeasibleInitialGuess: If b_init leaves less than depth_floor of water.
        LineSearchFailure: If not even the first step decreases the misfit.
    """
    check_same_grid(b_init, m.zeta)
    ceiling = m.zeta.values - opts.depth_floor
    violation = b_init.values[1:-1] - ceiling[1:-1]
    if np.any(violation > 1e-12):
        raise InfeasibleInitialGuess(
            f"initial bottom exceeds zeta - depth_floor by up to {float(np.max(violation)):.4g}"
        )
    optimizer = ProjectedBFGS(ceiling, m.b_left, m.b_right, opts)
    identifiable = is_identifiable(m)
    if not identifiable:
        logger.warning("surface potential is constant on the window; the bottom is not identifiable")

    x = optimizer.projection(b_init.values.copy())

    def evaluate(values: np.ndarray) -> float:
        return misfit(b_init.with_values(values), m, theta, opts)

    f, g_field = value_and_gradient(b_init.with_values(x), m, theta, opts)
    g = g_field.values
    history, iterates = [f], [x.copy()]
    converged, stop_reason, iteration = False, "max_iters", 0

    def result() -> InversionResult:
        b_est = b_init.with_values(x)
        return InversionResult(
            b_est=b_est,
            misfit_history=history,
            converged=converged,
            iterations=iteration,
            identifiable=identifiable,
            stop_reason=stop_reason,
            l1_error_vs_truth=None if b_true is None else l1_error(b_est, b_true),
            iterates=iterates,
        )

    while True:
        if float(np.max(np.abs(g))) <= opts.grad_tol:
            converged, stop_reason = True, "gradient"
            break
        if iteration >= opts.max_iters:
            break
        p = optimizer.find_search_direction(g)
        if float(np.dot(p, g)) >= 0:
            logger.debug("quasi-Newton direction is not a descent direction; resetting memory")
            optimizer._s.clear()
            optimizer._y.clear()
            p = optimizer.find_search_direction(g)
        xt, ft = optimizer.line_search(x, f, g, p, evaluate)
        if xt is None:
            stop_reason = "line_search"
            if iteration == 0:
                raise LineSearchFailure("no decrease along the first search direction", result=result())
            logger.info("line search failed at iteration %d, misfit %.6e", iteration, f)
            break
        _, g_new = value_and_gradient(b_init.with_values(xt), m, theta, opts)
        optimizer.remember(xt - x, g_new.values - g)
        decrease = f - ft
        x, f, g = xt, ft, g_new.values
        iteration += 1
        history.append(f)
        iterates.append(x.copy())
        logger.debug("iteration %d: misfit %.6e, |g|_inf %.3e", iteration, f, float(np.max(np.abs(g))))
        if decrease <= opts.ftol * abs(f):
            converged, stop_reason = True, "ftol"
            break

    logger.info("inversion stopped after %d iterations (%s), misfit %.6e", iteration, stop_reason, f)
    return result()
