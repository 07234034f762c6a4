"""
Grids, sampled profiles and fluid-domain bookkeeping.

Everything here works on a uniform one dimensional grid over the window
O = (a1, a2). Bottoms, surfaces and potentials are ScalarField values on that
grid; two-dimensional regions are described either by node-wise vertical bounds
(ProfileRegion) or by a pixel raster (Raster).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy import ndimage

from bathy.exceptions import (
    DegenerateComponent,
    DepthViolation,
    GridError,
    GridMismatch,
)

logger = logging.getLogger(__name__)

RASTER_FACTOR = 8
MAX_RASTER_PIXELS = 4_000_000


@dataclass(frozen=True)
class Grid1D:
    """
    Uniform grid over [a1, a2].

    A periodic grid drops the right endpoint (it is identified with a1), so its
    spacing is (a2 - a1) / n_nodes instead of (a2 - a1) / (n_nodes - 1).

    Attributes:
        a1 (float): Left endpoint of O, meters.
        a2 (float): Right endpoint of O, meters.
        n_nodes (int): Number of grid nodes, at least 3.
        periodic (bool): Whether X = a2 is identified with X = a1.
    """
    a1: float
    a2: float
    n_nodes: int
    periodic: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.a1) and math.isfinite(self.a2)) or self.a2 <= self.a1:
            raise GridError(f"grid endpoints must satisfy a1 < a2, got a1={self.a1}, a2={self.a2}")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 3:
            raise GridError(f"grid needs at least 3 nodes, got n_nodes={self.n_nodes}")

    @property
    def length(self) -> float:
        return self.a2 - self.a1

    @property
    def spacing(self) -> float:
        if self.periodic:
            return self.length / self.n_nodes
        return self.length / (self.n_nodes - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.a1 + self.spacing * np.arange(self.n_nodes)

    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights (uniform for a periodic grid)."""
        w = np.full(self.n_nodes, self.spacing)
        if not self.periodic:
            w[0] = w[-1] = 0.5 * self.spacing
        return w

    def index_of(self, x: float, tol: float = 1e-9) -> Optional[int]:
        """Index of the node at x, or None when x is not a node."""
        pos = (x - self.a1) / self.spacing
        idx = int(round(pos))
        if abs(pos - idx) > tol or idx < 0 or idx >= self.n_nodes:
            return None
        return idx


def grid_derivative(values: np.ndarray, grid: Grid1D) -> np.ndarray:
    """
    Second-order first derivative along a grid.

    Central differences in the interior; one-sided second-order differences at
    the ends of a non-periodic grid, wrap-around differences on a periodic one.
    Works unchanged on complex input.
    """
    h = grid.spacing
    if grid.periodic:
        return (np.roll(values, -1, axis=0) - np.roll(values, 1, axis=0)) / (2.0 * h)
    return np.gradient(values, h, axis=0, edge_order=2)


@dataclass(frozen=True)
class ScalarField:
    """
    A real function sampled at the nodes of a Grid1D.

    Used for bottoms, surfaces, surface potentials and their derived fields.
    Values are copied into a read-only float64 array on construction.
    """
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 0:
            values = np.full(self.grid.n_nodes, float(values))
        if values.shape != (self.grid.n_nodes,):
            raise GridMismatch(
                f"field has {values.shape} values but the grid has {self.grid.n_nodes} nodes"
            )
        if not np.all(np.isfinite(values)):
            raise GridError("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid1D, func: Callable[[np.ndarray], np.ndarray]) -> "ScalarField":
        return cls(grid, np.broadcast_to(func(grid.nodes), (grid.n_nodes,)))

    @classmethod
    def constant(cls, grid: Grid1D, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.n_nodes, float(value)))

    def derivative(self) -> np.ndarray:
        return grid_derivative(self.values, self.grid)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2_norm(self, mask: Optional[np.ndarray] = None) -> float:
        return weighted_l2(self.values, self.grid, mask)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def at(self, index: int) -> float:
        return float(self.values[index])


def weighted_l2(values: np.ndarray, grid: Grid1D, mask: Optional[np.ndarray] = None) -> float:
    """Discrete L2(O) norm with trapezoid weights, optionally restricted to a node mask."""
    w = grid.weights()
    if mask is not None:
        w = w * mask
    return float(np.sqrt(np.sum(w * np.abs(values) ** 2)))


def sup_norm(values: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    if mask is not None:
        if not np.any(mask):
            return 0.0
        values = values[mask]
    return float(np.max(np.abs(values)))


def check_same_grid(*fields: ScalarField) -> Grid1D:
    """
    Return the grid shared by all fields.

    Raises:
        GridMismatch: If any two fields live on different grids.
    """
    grid = fields[0].grid
    for other in fields[1:]:
        if other.grid != grid:
            raise GridMismatch(f"fields live on different grids: {grid} vs {other.grid}")
    return grid


def zero_threshold(*fields: ScalarField) -> float:
    """Sign-classification floor 1e-12 * max(1, sup norms of the fields)."""
    return 1e-12 * max([1.0] + [f.max_abs() for f in fields])


@dataclass(frozen=True)
class FluidDomainSpec:
    """
    Validated fluid domain between a bottom and a surface.

    Attributes:
        bottom (ScalarField): Bottom elevation b.
        surface (ScalarField): Surface elevation zeta.
        h0 (float): Guaranteed minimum depth.
        lipschitz_r0 (float): Reporting estimate of the Lipschitz radius.
        lipschitz_m0 (float): Largest discrete slope of either profile.
    """
    bottom: ScalarField
    surface: ScalarField
    h0: float
    lipschitz_r0: float
    lipschitz_m0: float

    @property
    def grid(self) -> Grid1D:
        return self.bottom.grid

    @property
    def depth(self) -> np.ndarray:
        return self.surface.values - self.bottom.values


def build_domain(bottom: ScalarField, surface: ScalarField, h0: float) -> FluidDomainSpec:
    """
    Validate a (bottom, surface) pair and attach Lipschitz metadata.

    Args:
        bottom (ScalarField): Bottom profile b.
        surface (ScalarField): Surface profile zeta.
        h0 (float): Required minimum depth, strictly positive.

    Returns:
        FluidDomainSpec: The validated domain.

    Raises:
        GridMismatch: If the profiles live on different grids.
        DepthViolation: If zeta - b drops below h0 at some node.
    """
    grid = check_same_grid(bottom, surface)
    if not h0 > 0:
        raise DepthViolation(f"minimum depth must be positive, got h0={h0}")
    depth = surface.values - bottom.values
    min_depth = float(np.min(depth))
    if min_depth < h0:
        worst = int(np.argmin(depth))
        raise DepthViolation(
            f"depth {min_depth:.6g} at X={grid.nodes[worst]:.6g} is below h0={h0:.6g}"
        )
    m0 = max(float(np.max(np.abs(bottom.derivative()))), float(np.max(np.abs(surface.derivative()))))
    r0 = min(h0, grid.length) / 4.0
    return FluidDomainSpec(bottom=bottom, surface=surface, h0=h0, lipschitz_r0=r0, lipschitz_m0=m0)


def envelopes(
    zeta: ScalarField, zeta0: ScalarField, b: ScalarField, b0: ScalarField
) -> Tuple[ScalarField, ScalarField]:
    """Pointwise lower surface envelope min(zeta, zeta0) and upper bottom envelope max(b, b0)."""
    grid = check_same_grid(zeta, zeta0, b, b0)
    return (
        ScalarField(grid, np.minimum(zeta.values, zeta0.values)),
        ScalarField(grid, np.maximum(b.values, b0.values)),
    )


@dataclass(frozen=True)
class SurfaceSplit:
    """Node masks of S1 (zeta above zeta0) and S2 (the rest, ties included)."""
    s1_mask: np.ndarray
    s2_mask: np.ndarray


def split_surface(zeta: ScalarField, zeta0: ScalarField) -> SurfaceSplit:
    check_same_grid(zeta, zeta0)
    s1 = (zeta.values - zeta0.values) > zero_threshold(zeta, zeta0)
    return SurfaceSplit(s1_mask=s1, s2_mask=~s1)


@dataclass(frozen=True)
class ProfileRegion:
    """Region {lower(X) < y <= upper(X)} given by node-wise vertical bounds."""
    lower: ScalarField
    upper: ScalarField


@dataclass(frozen=True)
class Raster:
    """
    Pixel rasterization of a planar region.

    Attributes:
        x_centers (np.ndarray): Pixel centre abscissae.
        y_centers (np.ndarray): Pixel centre ordinates.
        mask (np.ndarray): Boolean array (len(x_centers), len(y_centers)), True inside.
        pixel (float): Pixel side.
        distance (np.ndarray): Distance of each inside pixel centre to the region
            boundary (zero outside).
    """
    x_centers: np.ndarray
    y_centers: np.ndarray
    mask: np.ndarray
    pixel: float
    distance: np.ndarray


def region_area(region: Union[ProfileRegion, Raster]) -> float:
    """
    Lebesgue measure of a region.

    Profile regions use trapezoid quadrature of the (non-negative) vertical extent;
    rasters count pixels.
    """
    if isinstance(region, Raster):
        return float(np.count_nonzero(region.mask)) * region.pixel ** 2
    grid = check_same_grid(region.lower, region.upper)
    extent = np.clip(region.upper.values - region.lower.values, 0.0, None)
    return float(np.sum(grid.weights() * extent))


def boundary_counting_measure(grid: Grid1D) -> float:
    """Counting measure of the boundary {a1, a2} of O."""
    return 2.0


def positive_part_integral(x: np.ndarray, f: np.ndarray) -> float:
    """Exact integral of max(f, 0) for the piecewise linear interpolant of f."""
    f0, f1 = f[:-1], f[1:]
    dx = np.diff(x)
    both = (f0 >= 0) & (f1 >= 0)
    cross = f0 * f1 < 0
    total = np.where(both, 0.5 * (f0 + f1) * dx, 0.0)
    denom = np.where(cross, np.abs(f0) + np.abs(f1), 1.0)
    p0, p1 = np.maximum(f0, 0.0), np.maximum(f1, 0.0)
    total = total + np.where(cross, 0.5 * (p0 ** 2 + p1 ** 2) / denom * dx, 0.0)
    return float(np.sum(total))


@dataclass(frozen=True)
class Component:
    """
    One connected piece of the inter-bottom region.

    A '+' component is {b0 < y <= b} (it lies in the b0-fluid only), a '-'
    component is {b < y <= b0}. node_range is the inclusive run of nodes where
    the sign holds strictly; the span arrays extend it by one neighbour on each
    side so the zero crossings are kept.
    """
    sign: int
    node_range: Tuple[int, int]
    x_start: float
    x_end: float
    area: float
    span_x: np.ndarray = field(repr=False)
    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)
    spacing: float = 0.0
    span_start: int = 0
    rho: float = 0.0
    fat: bool = False

    @property
    def sign_label(self) -> str:
        return "+" if self.sign > 0 else "-"

    def to_report(self) -> dict:
        return {
            "sign": self.sign_label,
            "x_start": self.x_start,
            "x_end": self.x_end,
            "area": self.area,
            "rho": self.rho,
            "fat": self.fat,
        }


@dataclass(frozen=True)
class RegionDecomposition:
    components: Tuple[Component, ...]

    @property
    def total_area(self) -> float:
        return float(sum(c.area for c in self.components))

    def by_sign(self, sign: int) -> List[Component]:
        return [c for c in self.components if c.sign == sign]

    def to_report(self) -> List[dict]:
        return [c.to_report() for c in self.components]


def _sign_runs(signs: np.ndarray) -> List[Tuple[int, int, int]]:
    runs = []
    start = None
    for i, s in enumerate(signs):
        if start is not None and s != signs[start]:
            runs.append((start, i - 1, int(signs[start])))
            start = None
        if start is None and s != 0:
            start = i
    if start is not None:
        runs.append((start, len(signs) - 1, int(signs[start])))
    return runs


def _crossing(x0: float, x1: float, f0: float, f1: float) -> float:
    # f0 <= 0 < f1 or the reverse
    if f1 == f0:
        return x0
    t = min(max(-f0 / (f1 - f0), 0.0), 1.0)
    return x0 + (x1 - x0) * t


def area_floor(grid: Grid1D, *fields: ScalarField) -> float:
    return 1e-12 * grid.length * max([1.0] + [f.max_abs() for f in fields])


def decompose_interbottom(
    b: ScalarField,
    b0: ScalarField,
    ceiling: Optional[ScalarField] = None,
    raster_factor: int = RASTER_FACTOR,
) -> RegionDecomposition:
    """
    Split the region between two bottoms into connected components.

    Components are maximal node runs of one strict sign of b - b0 (beyond the
    zero threshold); a single sub-threshold node between two runs of the same
    sign is absorbed into them. Each component gets its exact piecewise-linear
    area and its fatness radius.

    Args:
        b (ScalarField): First bottom.
        b0 (ScalarField): Second bottom.
        ceiling (ScalarField, optional): Upper envelope used to clip the rasters.
        raster_factor (int): Raster refinement relative to the grid spacing.

    Returns:
        RegionDecomposition: Components in left-to-right order.
    """
    grid = check_same_grid(b, b0)
    x = grid.nodes
    diff = b.values - b0.values
    tau = zero_threshold(b, b0)
    signs = np.where(diff > tau, 1, np.where(diff < -tau, -1, 0))
    for i in range(1, len(signs) - 1):
        if signs[i] == 0 and signs[i - 1] != 0 and signs[i - 1] == signs[i + 1]:
            signs[i] = signs[i - 1]

    floor = area_floor(grid, b, b0)
    components = []
    for start, stop, sign in _sign_runs(signs):
        lo, hi = max(start - 1, 0), min(stop + 1, grid.n_nodes - 1)
        f = sign * diff[lo:hi + 1]
        area = positive_part_integral(x[lo:hi + 1], f)
        if area <= floor:
            logger.debug("dropping component on nodes %d..%d with area %.3e", start, stop, area)
            continue
        x_start = x[start] if lo == start else _crossing(x[lo], x[start], f[0], f[start - lo])
        x_end = x[stop] if hi == stop else _crossing(x[hi], x[stop], f[-1], f[stop - lo])
        if sign > 0:
            lower, upper = b0.values[lo:hi + 1], b.values[lo:hi + 1]
        else:
            lower, upper = b.values[lo:hi + 1], b0.values[lo:hi + 1]
        if ceiling is not None:
            upper = np.minimum(upper, ceiling.values[lo:hi + 1])
        component = Component(
            sign=sign,
            node_range=(start, stop),
            x_start=float(x_start),
            x_end=float(x_end),
            area=area,
            span_x=x[lo:hi + 1].copy(),
            lower=np.array(lower),
            upper=np.array(upper),
            spacing=grid.spacing,
            span_start=lo,
        )
        rho, fat = fatness_radius(component, raster_factor=raster_factor)
        if not fat:
            logger.warning(
                "component %s on [%.4g, %.4g] is not fat at raster resolution",
                component.sign_label, component.x_start, component.x_end,
            )
        components.append(replace(component, rho=rho, fat=fat))
    return RegionDecomposition(components=tuple(components))


def rasterize_component(
    component: Component,
    ceiling: Optional[ScalarField] = None,
    raster_factor: int = RASTER_FACTOR,
) -> Raster:
    """
    Rasterize a component on square pixels at least raster_factor times finer than the grid.

    The distance of an inside pixel to the boundary is the Euclidean distance
    transform to the nearest outside pixel centre, less half a pixel.
    """
    width = component.x_end - component.x_start
    lower, upper = component.lower, component.upper
    if ceiling is not None:
        start = component.span_start
        upper = np.minimum(upper, ceiling.values[start:start + len(upper)])
    y_min, y_max = float(np.min(lower)), float(np.max(upper))
    pixel = component.spacing / max(raster_factor, RASTER_FACTOR)
    pixel = max(pixel, math.sqrt(max(width * (y_max - y_min), 0.0) / MAX_RASTER_PIXELS))
    nx = max(int(math.ceil(width / pixel)), 1)
    ny = max(int(math.ceil((y_max - y_min) / pixel)), 1)
    xc = component.x_start + (np.arange(-1, nx + 1) + 0.5) * pixel
    yc = y_min + (np.arange(-1, ny + 1) + 0.5) * pixel
    inside_x = (xc >= component.x_start) & (xc <= component.x_end)
    lo_c = np.interp(xc, component.span_x, lower)
    up_c = np.interp(xc, component.span_x, upper)
    mask = inside_x[:, None] & (yc[None, :] > lo_c[:, None]) & (yc[None, :] <= up_c[:, None])
    distance = np.where(mask, ndimage.distance_transform_edt(mask) * pixel - 0.5 * pixel, 0.0)
    return Raster(x_centers=xc, y_centers=yc, mask=mask, pixel=pixel, distance=distance)


def eroded_area(raster: Raster, rho: float) -> float:
    """Measure of the rho-erosion {points farther than rho from the complement}."""
    return float(np.count_nonzero(raster.mask & (raster.distance > rho))) * raster.pixel ** 2


def fatness_radius(
    component: Component,
    ceiling: Optional[ScalarField] = None,
    raster_factor: int = RASTER_FACTOR,
) -> Tuple[float, bool]:
    """
    Largest rho whose erosion keeps at least half of the component's measure.

    The count of pixels farther than rho from the boundary is a step function of
    rho, so the supremum is read off the sorted pixel distances directly.

    Args:
        component (Component): A nonempty component.
        ceiling (ScalarField, optional): Clips the region from above.
        raster_factor (int): Raster refinement relative to the grid spacing.

    Returns:
        tuple: (rho, fat) where fat means rho exceeds one pixel.

    Raises:
        DegenerateComponent: If the component has no measurable area.
    """
    if component.area <= 0.0:
        raise DegenerateComponent(f"component on [{component.x_start}, {component.x_end}] has zero area")
    raster = rasterize_component(component, ceiling=ceiling, raster_factor=raster_factor)
    inside = np.sort(raster.distance[raster.mask])[::-1]
    if inside.size == 0:
        raise DegenerateComponent(
            f"component on [{component.x_start:.6g}, {component.x_end:.6g}] is thinner than one pixel"
        )
    keep = int(math.ceil(0.5 * inside.size))
    rho = float(inside[keep - 1])
    return rho, rho > raster.pixel
