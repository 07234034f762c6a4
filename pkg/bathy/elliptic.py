"""
Terrain-following finite-difference solver for the velocity potential.

The fluid domain {b(X) < y < zeta(X)} is mapped onto the rectangle
[a1, a2] x [0, 1] by y = b + sigma * (zeta - b). Laplace's equation picks up
mixed-derivative and first-order terms from the chain rule; they are discretised
with second-order centred differences. Boundary conditions:

    sigma = 1          Dirichlet, phi = psi
    X = a1, a2         Dirichlet, phi = theta (non-periodic grids only)
    sigma = 0          b' phi_x - phi_y = 0, one-sided second-order in sigma

The assembly routine only uses arithmetic that is analytic in the bottom values,
so it also accepts complex bottoms (complex-step differentiation in the
inversion module).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import trapezoid
from scipy.interpolate import RegularGridInterpolator

from bathy.exceptions import (
    ConfigError,
    CurveOutsideDomain,
    GridMismatch,
    RegionOutsideDomain,
    SolverDivergence,
)
from bathy.geometry import (
    FluidDomainSpec,
    Grid1D,
    ScalarField,
    build_domain,
    check_same_grid,
    grid_derivative,
)

logger = logging.getLogger(__name__)

DEFAULT_N_SIGMA = 33
SOLVER_TOL = 1e-10
SIGMA_TOL = 1e-9


@dataclass(frozen=True)
class SolverSettings:
    """
    Linear solver configuration.

    Attributes:
        method (str): "direct" (sparse LU) or "bicgstab" (Jacobi preconditioned).
        tol (float): Required relative residual.
        maxiter (int): Iteration cap of the iterative method.
    """
    method: str = "direct"
    tol: float = SOLVER_TOL
    maxiter: int = 20000

    def __post_init__(self):
        if self.method not in ("direct", "bicgstab"):
            raise ConfigError(f"unknown solver method '{self.method}'")
        if not self.tol > 0:
            raise ConfigError(f"solver tolerance must be positive, got {self.tol}")


@dataclass(frozen=True)
class SolverDiagnostics:
    residual: float
    iterations: int
    method: str
    n_nodes: int
    n_sigma: int

    def to_report(self) -> dict:
        return {
            "residual": self.residual,
            "iterations": self.iterations,
            "method": self.method,
            "grid": {"n_nodes": self.n_nodes, "n_sigma": self.n_sigma},
        }


@dataclass(frozen=True)
class LateralTrace:
    """Dirichlet data theta on the two walls, one value per sigma layer."""
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        left = np.array(self.left, dtype=np.float64)
        right = np.array(self.right, dtype=np.float64)
        if left.shape != right.shape or left.ndim != 1:
            raise GridMismatch("wall traces must be 1D arrays of equal length")
        if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
            raise ConfigError("wall traces contain non-finite values")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def n_sigma(self) -> int:
        return len(self.left)

    @classmethod
    def constant(cls, n_sigma: int, left: float, right: float) -> "LateralTrace":
        return cls(np.full(n_sigma, float(left)), np.full(n_sigma, float(right)))


def sigma_coefficients(grid: Grid1D, sigma: np.ndarray, bottom: np.ndarray, surface: np.ndarray):
    """
    Chain-rule coefficients of the sigma map.

    Returns:
        tuple: (depth, bottom slope, sigma_x, sigma_xx); the last two are
        (n_nodes, n_sigma) arrays.
    """
    depth = surface - bottom
    bp = grid_derivative(bottom, grid)
    bpp = grid_derivative(bp, grid)
    hp = grid_derivative(depth, grid)
    hpp = grid_derivative(hp, grid)
    s = sigma[None, :]
    lift = bp[:, None] + s * hp[:, None]
    inv_h = 1.0 / depth[:, None]
    sigma_x = -lift * inv_h
    sigma_xx = -(bpp[:, None] + s * hpp[:, None]) * inv_h + 2.0 * lift * hp[:, None] * inv_h ** 2
    return depth, bp, sigma_x, sigma_xx


def assemble_system(
    grid: Grid1D,
    sigma: np.ndarray,
    bottom: np.ndarray,
    surface: np.ndarray,
    psi: np.ndarray,
    theta: Optional[LateralTrace],
) -> Tuple[sp.csr_matrix, np.ndarray]:
    """
    Build the sparse system A u = f for the transformed potential problem.

    Unknowns are ordered X-major, u[i * n_sigma + j]. Dirichlet nodes keep an
    identity row. Interior rows are scaled by dX**2 and bottom rows by the
    inverse of their diagonal factor so all coefficients are O(1).
    """
    n, m = grid.n_nodes, len(sigma)
    dx, ds = grid.spacing, sigma[1] - sigma[0]
    depth, bp, sigma_x, sigma_xx = sigma_coefficients(grid, sigma, bottom, surface)
    dtype = np.result_type(bottom, surface, np.float64)

    def idx(i, j):
        return i * m + j

    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []

    def put(r, c, v):
        r = np.asarray(r)
        rows.append(r.ravel())
        cols.append(np.broadcast_to(np.asarray(c), r.shape).ravel())
        vals.append(np.broadcast_to(np.asarray(v, dtype=dtype), r.shape).ravel())

    i_first, i_last = (0, n) if grid.periodic else (1, n - 1)
    ii = np.arange(i_first, i_last)
    ip, im = (ii + 1) % n, (ii - 1) % n

    # interior Laplacian rows
    I, J = np.meshgrid(ii, np.arange(1, m - 1), indexing="ij")
    IP, IM = (I + 1) % n, (I - 1) % n
    inv_h = 1.0 / depth[I]
    c_ss = (sigma_x[I, J] ** 2 + inv_h ** 2) * dx ** 2 / ds ** 2
    c_s = sigma_xx[I, J] * dx ** 2 / (2.0 * ds)
    c_xs = 2.0 * sigma_x[I, J] * dx / (4.0 * ds)
    row = idx(I, J)
    put(row, idx(I, J), -2.0 - 2.0 * c_ss)
    put(row, idx(IP, J), 1.0)
    put(row, idx(IM, J), 1.0)
    put(row, idx(I, J + 1), c_ss + c_s)
    put(row, idx(I, J - 1), c_ss - c_s)
    put(row, idx(IP, J + 1), c_xs)
    put(row, idx(IP, J - 1), -c_xs)
    put(row, idx(IM, J + 1), -c_xs)
    put(row, idx(IM, J - 1), c_xs)

    # bottom conormal rows, b' u_X - (1 + b'^2) u_sigma / H = 0
    slope = bp[ii]
    lateral = slope * ds * depth[ii] / (dx * (1.0 + slope ** 2))
    row = idx(ii, 0)
    put(row, idx(ii, 0), 3.0)
    put(row, idx(ii, 1), -4.0)
    put(row, idx(ii, 2), 1.0)
    put(row, idx(ip, 0), lateral)
    put(row, idx(im, 0), -lateral)

    f = np.zeros(n * m)
    top = idx(np.arange(n), m - 1)
    put(top, top, 1.0)
    f[top] = psi
    if not grid.periodic:
        if theta is None or theta.n_sigma != m:
            raise GridMismatch(f"wall traces need {m} sigma layers")
        for i, trace in ((0, theta.left), (n - 1, theta.right)):
            wall = idx(i, np.arange(m - 1))
            put(wall, wall, 1.0)
            f[wall] = trace[:-1]

    a = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n * m, n * m),
    )
    return a, f


def _jacobi_preconditioner(a: sp.csr_matrix) -> spla.LinearOperator:
    diag = a.diagonal()
    inv = np.where(diag != 0, 1.0 / np.where(diag != 0, diag, 1.0), 1.0)
    return spla.LinearOperator(a.shape, matvec=lambda v: inv * v)


def solve_system(a: sp.csr_matrix, f: np.ndarray, settings: SolverSettings) -> Tuple[np.ndarray, float, int]:
    """
    Solve a sparse system and verify its relative residual.

    Returns:
        tuple: (solution, relative residual, iterations).

    Raises:
        SolverDivergence: If the residual exceeds settings.tol or the
            iterative method stops without converging.
    """
    scale = float(np.linalg.norm(f)) or 1.0
    if settings.method == "direct":
        u = spla.splu(a.tocsc()).solve(f)
        iterations = 1
    else:
        counter = {"n": 0}

        def count(_):
            counter["n"] += 1

        u, info = spla.bicgstab(
            a, f, rtol=settings.tol, maxiter=settings.maxiter,
            M=_jacobi_preconditioner(a), callback=count,
        )
        iterations = counter["n"]
        if info != 0:
            raise SolverDivergence(f"bicgstab stopped with info={info} after {iterations} iterations")
    residual = float(np.linalg.norm(a @ u - f)) / scale
    if not np.all(np.isfinite(u)) or residual > max(settings.tol, 1e-13) * 1.0001:
        raise SolverDivergence(f"relative residual {residual:.3e} exceeds {settings.tol:.1e}")
    logger.debug("%s solve: residual %.3e, %d iterations", settings.method, residual, iterations)
    return u, residual, iterations


@dataclass(frozen=True)
class SigmaMap:
    """
    The map y(X, sigma) = b(X) + sigma * (zeta(X) - b(X)) over a validated domain.

    Attributes:
        domain (FluidDomainSpec): Domain being flattened.
        n_sigma (int): Number of sigma layers, at least 3.
    """
    domain: FluidDomainSpec
    n_sigma: int = DEFAULT_N_SIGMA

    def __post_init__(self):
        if self.n_sigma < 3:
            raise ConfigError(f"need at least 3 sigma layers, got {self.n_sigma}")

    @property
    def grid(self) -> Grid1D:
        return self.domain.grid

    @cached_property
    def sigma(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_sigma)

    @property
    def d_sigma(self) -> float:
        return 1.0 / (self.n_sigma - 1)

    @cached_property
    def _coefficients(self):
        return sigma_coefficients(self.grid, self.sigma, self.domain.bottom.values, self.domain.surface.values)

    @property
    def depth(self) -> np.ndarray:
        return self._coefficients[0]

    @property
    def sigma_x(self) -> np.ndarray:
        return self._coefficients[2]

    @cached_property
    def y(self) -> np.ndarray:
        return self.domain.bottom.values[:, None] + self.sigma[None, :] * self.depth[:, None]

    def physical_gradient(self, f: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(d/dx, d/dy) in physical coordinates of a field sampled on the sigma grid."""
        f_x = grid_derivative(f, self.grid)
        f_s = np.gradient(f, self.d_sigma, axis=1, edge_order=2)
        return f_x + self.sigma_x * f_s, f_s / self.depth[:, None]

    def to_sigma(self, columns: np.ndarray, y: np.ndarray) -> np.ndarray:
        bottom = self.domain.bottom.values[columns]
        return (y - bottom) / self.depth[columns]

    def interpolate_columns(self, values: np.ndarray, columns: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Linear interpolation in sigma of a grid field along given columns."""
        s = np.clip(s, 0.0, 1.0)
        pos = s / self.d_sigma
        j = np.clip(np.floor(pos).astype(int), 0, self.n_sigma - 2)
        t = pos - j
        return (1.0 - t) * values[columns, j] + t * values[columns, j + 1]


@dataclass(frozen=True)
class SurfaceTraces:
    phi_on_surface: ScalarField
    grad_x_on_surface: ScalarField
    dy_on_surface: ScalarField
    normal_derivative: ScalarField


@dataclass(frozen=True)
class PotentialField:
    """
    Discrete velocity potential on a sigma grid.

    Attributes:
        sigma_map (SigmaMap): Geometry of the solve.
        values (np.ndarray): phi samples, shape (n_nodes, n_sigma).
        psi (ScalarField): Surface Dirichlet data.
        theta (LateralTrace | None): Wall data, None on periodic grids.
        diagnostics (SolverDiagnostics): Residual and iteration count.
    """
    sigma_map: SigmaMap
    values: np.ndarray = field(repr=False)
    psi: ScalarField
    theta: Optional[LateralTrace]
    diagnostics: SolverDiagnostics

    @property
    def domain(self) -> FluidDomainSpec:
        return self.sigma_map.domain

    @property
    def grid(self) -> Grid1D:
        return self.sigma_map.grid

    @cached_property
    def gradient(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.sigma_map.physical_gradient(self.values)

    @cached_property
    def derivative_stack(self) -> Dict[str, np.ndarray]:
        """phi and its physical derivatives up to order two."""
        phi_x, phi_y = self.gradient
        phi_xx, phi_xy = self.sigma_map.physical_gradient(phi_x)
        _, phi_yy = self.sigma_map.physical_gradient(phi_y)
        return {
            "phi": self.values, "phi_x": phi_x, "phi_y": phi_y,
            "phi_xx": phi_xx, "phi_xy": phi_xy, "phi_yy": phi_yy,
        }

    @property
    def energy_density(self) -> np.ndarray:
        phi_x, phi_y = self.gradient
        return phi_x ** 2 + phi_y ** 2

    def rows(self):
        """CSV rows (x, sigma, y, phi) in X-major order."""
        x = self.grid.nodes
        for i in range(self.grid.n_nodes):
            for j in range(self.sigma_map.n_sigma):
                yield x[i], self.sigma_map.sigma[j], self.sigma_map.y[i, j], self.values[i, j]

    def sample(self, x: np.ndarray, y: np.ndarray, values: np.ndarray) -> np.ndarray:
        """
        Bilinear interpolation in (X, sigma) of a grid field at physical points.

        Raises:
            CurveOutsideDomain: If a point lies outside the solved domain.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        nodes = self.grid.nodes
        if np.any(x < nodes[0] - SIGMA_TOL) or np.any(x > nodes[-1] + SIGMA_TOL):
            raise CurveOutsideDomain("sample point lies outside the grid")
        bottom = np.interp(x, nodes, self.domain.bottom.values)
        depth = np.interp(x, nodes, self.sigma_map.depth)
        s = (y - bottom) / depth
        if np.any(s < -SIGMA_TOL) or np.any(s > 1.0 + SIGMA_TOL):
            raise CurveOutsideDomain("sample point lies outside the fluid domain")
        interp = RegularGridInterpolator((nodes, self.sigma_map.sigma), values, method="linear")
        pts = np.column_stack([np.clip(x, nodes[0], nodes[-1]).ravel(), np.clip(s, 0.0, 1.0).ravel()])
        return interp(pts).reshape(x.shape)


def _default_theta(psi: ScalarField, n_sigma: int) -> LateralTrace:
    return LateralTrace.constant(n_sigma, psi.values[0], psi.values[-1])


def solve_potential(
    domain: FluidDomainSpec,
    psi: ScalarField,
    theta: Optional[LateralTrace] = None,
    n_sigma: int = DEFAULT_N_SIGMA,
    settings: Optional[SolverSettings] = None,
) -> PotentialField:
    """
    Solve the potential problem on a fluid domain.

    Args:
        domain (FluidDomainSpec): Validated fluid domain.
        psi (ScalarField): Surface potential on the domain grid.
        theta (LateralTrace, optional): Wall data. Ignored on periodic grids;
            on a non-periodic grid None means the constant continuation of psi.
        n_sigma (int): Number of sigma layers.
        settings (SolverSettings, optional): Linear solver settings.

    Returns:
        PotentialField: The solved potential with diagnostics.

    Raises:
        GridMismatch: If psi or theta do not fit the grid.
        SolverDivergence: If the residual requirement is not met.
    """
    check_same_grid(domain.bottom, psi)
    settings = settings or SolverSettings()
    sigma_map = SigmaMap(domain, n_sigma)
    if domain.grid.periodic:
        theta = None
    elif theta is None:
        theta = _default_theta(psi, n_sigma)
    a, f = assemble_system(
        domain.grid, sigma_map.sigma, domain.bottom.values, domain.surface.values, psi.values, theta
    )
    u, residual, iterations = solve_system(a, f, settings)
    values = u.reshape(domain.grid.n_nodes, n_sigma)
    values.setflags(write=False)
    diagnostics = SolverDiagnostics(residual, iterations, settings.method, domain.grid.n_nodes, n_sigma)
    return PotentialField(sigma_map, values, psi, theta, diagnostics)


def top_sigma_derivative(values: np.ndarray, d_sigma: float) -> np.ndarray:
    """One-sided second-order d/dsigma at sigma = 1 (X-major array, any dtype)."""
    return (3.0 * values[..., -1] - 4.0 * values[..., -2] + values[..., -3]) / (2.0 * d_sigma)


def dno_from_field(phi: PotentialField) -> ScalarField:
    """G(zeta, b) psi = (1 + zeta'^2) u_sigma / H - zeta' psi' at sigma = 1."""
    zeta_x = phi.domain.surface.derivative()
    psi_x = phi.psi.derivative()
    u_s = top_sigma_derivative(phi.values, phi.sigma_map.d_sigma)
    return ScalarField(phi.grid, (1.0 + zeta_x ** 2) * u_s / phi.sigma_map.depth - zeta_x * psi_x)


def dno(
    domain: FluidDomainSpec,
    psi: ScalarField,
    theta: Optional[LateralTrace] = None,
    n_sigma: int = DEFAULT_N_SIGMA,
    settings: Optional[SolverSettings] = None,
) -> ScalarField:
    """Dirichlet-to-Neumann map sqrt(1 + |zeta'|^2) d_n phi at the surface."""
    return dno_from_field(solve_potential(domain, psi, theta, n_sigma, settings))


def surface_traces(phi: PotentialField) -> SurfaceTraces:
    zeta_x = phi.domain.surface.derivative()
    psi_x = phi.psi.derivative()
    dy = top_sigma_derivative(phi.values, phi.sigma_map.d_sigma) / phi.sigma_map.depth
    g = dno_from_field(phi).values
    return SurfaceTraces(
        phi_on_surface=phi.psi,
        grad_x_on_surface=ScalarField(phi.grid, psi_x - zeta_x * dy),
        dy_on_surface=ScalarField(phi.grid, dy),
        normal_derivative=ScalarField(phi.grid, g / np.sqrt(1.0 + zeta_x ** 2)),
    )


def traces_from_measurements(
    psi: ScalarField, zeta: ScalarField, normal_deriv: ScalarField
) -> Tuple[ScalarField, ScalarField]:
    """
    Recover the surface values of d_y phi and d_X phi from surface data.

    Returns:
        tuple: (dy, grad_x) on the shared grid.
    """
    grid = check_same_grid(psi, zeta, normal_deriv)
    zeta_x = zeta.derivative()
    psi_x = psi.derivative()
    metric = 1.0 + zeta_x ** 2
    dy = (np.sqrt(metric) * normal_deriv.values + zeta_x * psi_x) / metric
    return ScalarField(grid, dy), ScalarField(grid, psi_x - dy * zeta_x)


def _column_integral(sigma: np.ndarray, f: np.ndarray, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    inner = sigma[(sigma > lo) & (sigma < hi)]
    s = np.concatenate(([lo], inner, [hi]))
    return float(trapezoid(np.interp(s, sigma, f), s))


def _sigma_bounds(phi: PotentialField, lower: Optional[ScalarField], upper: Optional[ScalarField]):
    n = phi.grid.n_nodes
    cols = np.arange(n)
    s_lo = np.zeros(n) if lower is None else phi.sigma_map.to_sigma(cols, lower.values)
    s_hi = np.ones(n) if upper is None else phi.sigma_map.to_sigma(cols, upper.values)
    active = s_hi > s_lo
    if np.any(active & ((s_lo < -SIGMA_TOL) | (s_hi > 1.0 + SIGMA_TOL))):
        raise RegionOutsideDomain("integration region leaves the solved domain")
    return np.clip(s_lo, 0.0, 1.0), np.clip(s_hi, 0.0, 1.0)


def integrate_region(
    phi: PotentialField,
    values: np.ndarray,
    lower: Optional[ScalarField] = None,
    upper: Optional[ScalarField] = None,
) -> float:
    """
    Integrate a grid field over {lower < y <= upper} inside the solved domain.

    Each column is integrated exactly for the piecewise-linear sigma
    interpolant, then columns are combined with trapezoid weights.

    Raises:
        RegionOutsideDomain: If the bounds leave the domain where they are active.
    """
    s_lo, s_hi = _sigma_bounds(phi, lower, upper)
    sigma = phi.sigma_map.sigma
    columns = np.array([
        _column_integral(sigma, values[i], s_lo[i], s_hi[i]) for i in range(phi.grid.n_nodes)
    ])
    return float(np.sum(phi.grid.weights() * columns * phi.sigma_map.depth))


def energy(
    phi: PotentialField, lower: Optional[ScalarField] = None, upper: Optional[ScalarField] = None
) -> float:
    """Dirichlet energy of phi over {lower < y <= upper} (whole domain by default)."""
    return integrate_region(phi, phi.energy_density, lower, upper)


def sobolev_h2_norm(
    phi: PotentialField, lower: Optional[ScalarField] = None, upper: Optional[ScalarField] = None
) -> float:
    """Discrete H2 norm: root of the summed squared L2 norms of all derivatives up to order two."""
    total = sum(integrate_region(phi, f ** 2, lower, upper) for f in phi.derivative_stack.values())
    return math.sqrt(total)


def h2_distance(
    phi: PotentialField,
    phi0: PotentialField,
    lower: ScalarField,
    upper: ScalarField,
    n_layers: Optional[int] = None,
) -> float:
    """
    H2 norm of phi - phi0 over {lower < y <= upper}, a region inside both domains.

    Both derivative stacks are resampled onto a common set of layers between
    the two bounds before subtracting.
    """
    grid = check_same_grid(phi.psi, phi0.psi, lower, upper)
    n_layers = n_layers or max(phi.sigma_map.n_sigma, phi0.sigma_map.n_sigma)
    extent = np.clip(upper.values - lower.values, 0.0, None)
    tau = np.linspace(0.0, 1.0, n_layers)
    y = lower.values[:, None] + tau[None, :] * extent[:, None]
    cols = np.repeat(np.arange(grid.n_nodes)[:, None], n_layers, axis=1)
    s = phi.sigma_map.to_sigma(cols, y)
    s0 = phi0.sigma_map.to_sigma(cols, y)
    if np.any(s < -SIGMA_TOL) or np.any(s > 1 + SIGMA_TOL) or np.any(s0 < -SIGMA_TOL) or np.any(s0 > 1 + SIGMA_TOL):
        raise RegionOutsideDomain("common region leaves one of the solved domains")
    total = 0.0
    stack0 = phi0.derivative_stack
    for name, values in phi.derivative_stack.items():
        diff = phi.sigma_map.interpolate_columns(values, cols, s) - phi0.sigma_map.interpolate_columns(stack0[name], cols, s0)
        columns = trapezoid(diff ** 2, tau, axis=1) * extent
        total += float(np.sum(grid.weights() * columns))
    return math.sqrt(total)


@dataclass(frozen=True)
class BoundaryPiece:
    """
    Quadrature points of a boundary piece, all lying on grid columns.

    Graph pieces carry the arc-length metric in their weights; wall pieces are
    vertical segments with trapezoid weights in y. Normals point out of the
    region the piece bounds.
    """
    name: str
    columns: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    normal_x: np.ndarray
    normal_y: np.ndarray

    @property
    def measure(self) -> float:
        return float(np.sum(self.weights))


def graph_piece(name: str, curve: ScalarField, upward: bool = True, mask: Optional[np.ndarray] = None) -> BoundaryPiece:
    """The graph y = curve(X); upward=False for a piece bounding a region from below."""
    slope = curve.derivative()
    metric = np.sqrt(1.0 + slope ** 2)
    sign = 1.0 if upward else -1.0
    weights = curve.grid.weights() * metric
    if mask is not None:
        weights = weights * mask
    return BoundaryPiece(
        name=name,
        columns=np.arange(curve.grid.n_nodes),
        y=curve.values.copy(),
        weights=weights,
        normal_x=-sign * slope / metric,
        normal_y=sign / metric,
    )


def wall_piece(name: str, lower: ScalarField, upper: ScalarField, n_samples: int = 65) -> BoundaryPiece:
    """Vertical segments {lower(a) < y < upper(a)} at both endpoints a of a non-periodic grid."""
    grid = check_same_grid(lower, upper)
    columns, ys, weights, nx = [], [], [], []
    for column, outward in ((0, -1.0), (grid.n_nodes - 1, 1.0)):
        lo, hi = lower.values[column], upper.values[column]
        length = max(hi - lo, 0.0)
        y = np.linspace(lo, lo + length, n_samples)
        w = np.full(n_samples, length / (n_samples - 1))
        w[0] = w[-1] = 0.5 * w[0]
        columns.append(np.full(n_samples, column))
        ys.append(y)
        weights.append(w)
        nx.append(np.full(n_samples, outward))
    nx_all = np.concatenate(nx)
    return BoundaryPiece(
        name=name,
        columns=np.concatenate(columns),
        y=np.concatenate(ys),
        weights=np.concatenate(weights),
        normal_x=nx_all,
        normal_y=np.zeros_like(nx_all),
    )


@dataclass(frozen=True)
class PieceTrace:
    value: np.ndarray
    phi_x: np.ndarray
    phi_y: np.ndarray
    normal_derivative: np.ndarray


def trace_on_piece(phi: PotentialField, piece: BoundaryPiece) -> PieceTrace:
    """
    Traces of phi on a piece, including cross-traces on curves of another configuration.

    Points with zero weight are not checked and get zero values.

    Raises:
        CurveOutsideDomain: If a weighted point lies outside the solved domain.
    """
    active = piece.weights != 0
    s = phi.sigma_map.to_sigma(piece.columns, piece.y)
    outside = active & ((s < -SIGMA_TOL) | (s > 1.0 + SIGMA_TOL))
    if np.any(outside):
        raise CurveOutsideDomain(
            f"piece '{piece.name}' leaves the solved domain at {int(np.count_nonzero(outside))} points"
        )
    phi_x, phi_y = phi.gradient
    interp = phi.sigma_map.interpolate_columns
    value = np.where(active, interp(phi.values, piece.columns, s), 0.0)
    gx = np.where(active, interp(phi_x, piece.columns, s), 0.0)
    gy = np.where(active, interp(phi_y, piece.columns, s), 0.0)
    return PieceTrace(value, gx, gy, piece.normal_x * gx + piece.normal_y * gy)


def boundary_integral(f: np.ndarray, g: np.ndarray, piece: BoundaryPiece) -> float:
    """Quadrature of f * g over a boundary piece (f and g sampled at its points)."""
    return float(np.sum(piece.weights * np.asarray(f) * np.asarray(g)))


def piece_l2(f: np.ndarray, piece: BoundaryPiece) -> float:
    return math.sqrt(max(boundary_integral(f, f, piece), 0.0))


def own_boundary(phi: PotentialField) -> List[BoundaryPiece]:
    """Surface, bottom and (if present) walls of the solved domain."""
    pieces = [
        graph_piece("surface", phi.domain.surface, upward=True),
        graph_piece("bottom", phi.domain.bottom, upward=False),
    ]
    if not phi.grid.periodic:
        pieces.append(wall_piece("walls", phi.domain.bottom, phi.domain.surface, 2 * phi.sigma_map.n_sigma - 1))
    return pieces


@dataclass(frozen=True)
class GreenBalance:
    energy: float
    boundary_term: float
    flux: float
    flux_scale: float

    @property
    def defect(self) -> float:
        return abs(self.energy - self.boundary_term)


def green_balance(phi: PotentialField) -> GreenBalance:
    """Energy against the boundary term of Green's first identity, plus the net flux."""
    boundary_term = flux = flux_scale = 0.0
    for piece in own_boundary(phi):
        trace = trace_on_piece(phi, piece)
        boundary_term += boundary_integral(trace.value, trace.normal_derivative, piece)
        flux += boundary_integral(trace.normal_derivative, 1.0, piece)
        flux_scale += boundary_integral(np.abs(trace.normal_derivative), 1.0, piece)
    return GreenBalance(energy(phi), boundary_term, abs(flux), flux_scale)


@dataclass(frozen=True)
class StripHarmonic:
    """
    Exact harmonic cosh(k (y + h)) cos(k X) over the flat strip -h < y < 0.

    Its normal derivative vanishes on the flat bottom, so it solves the
    potential problem with psi = cosh(kh) cos(kX) and matching wall data.
    """
    k: float
    h: float

    def potential(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.cosh(self.k * (y + self.h)) * np.cos(self.k * x)

    def surface_potential(self, grid: Grid1D) -> ScalarField:
        return ScalarField(grid, self.potential(grid.nodes, 0.0))

    def dno(self, grid: Grid1D) -> ScalarField:
        return ScalarField(grid, self.k * np.sinh(self.k * self.h) * np.cos(self.k * grid.nodes))

    def domain(self, grid: Grid1D) -> FluidDomainSpec:
        return build_domain(ScalarField.constant(grid, -self.h), ScalarField.constant(grid, 0.0), 0.5 * self.h)

    def wall_trace(self, grid: Grid1D, n_sigma: int) -> LateralTrace:
        y = -self.h + self.h * np.linspace(0.0, 1.0, n_sigma)
        return LateralTrace(self.potential(grid.a1, y), self.potential(grid.nodes[-1], y))

    def energy(self, grid: Grid1D) -> float:
        """Closed-form Dirichlet energy over the strip."""
        k, h = self.k, self.h
        a, c = grid.a1, grid.nodes[-1]
        cos2 = 0.5 * (c - a) + (np.sin(2 * k * c) - np.sin(2 * k * a)) / (4 * k)
        sin2 = (c - a) - cos2
        sinh2 = (np.sinh(2 * k * h) / (4 * k) - 0.5 * h)
        cosh2 = (np.sinh(2 * k * h) / (4 * k) + 0.5 * h)
        return float(k ** 2 * (cosh2 * sin2 + sinh2 * cos2))
