"""
Seeded random streams and random admissible configurations for the margin checks.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from bathy.elliptic import DEFAULT_N_SIGMA, SolverSettings
from bathy.geometry import Grid1D, ScalarField

logger = logging.getLogger(__name__)

GENERATOR_NAME = "numpy.PCG64"


def make_rng(seed: Optional[int]) -> np.random.Generator:
    """PCG64 generator built from a SeedSequence; seed None draws fresh entropy."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _low_modes(grid: Grid1D, rng: np.random.Generator, amplitude: float, modes: int = 3) -> np.ndarray:
    x = (grid.nodes - grid.a1) / grid.length
    # whole periods only on a periodic grid
    base = 2.0 * np.pi if grid.periodic else np.pi
    coeffs = rng.uniform(-1.0, 1.0, size=(modes, 2)) / np.arange(1, modes + 1)[:, None] ** 2
    values = sum(
        c * np.sin(base * (k + 1) * x) + s * np.cos(base * (k + 1) * x)
        for k, (c, s) in enumerate(coeffs)
    )
    peak = float(np.max(np.abs(values))) or 1.0
    return amplitude * values / peak


@dataclass(frozen=True)
class RandomPair:
    b: ScalarField
    zeta: ScalarField
    psi: ScalarField
    b0: ScalarField
    zeta0: ScalarField
    psi0: ScalarField
    h0: float

    def solve(self, n_sigma: int = DEFAULT_N_SIGMA, settings: Optional[SolverSettings] = None):
        from bathy.certificate import solve_pair

        return solve_pair(
            self.b, self.zeta, self.psi, self.b0, self.zeta0, self.psi0, self.h0,
            n_sigma=n_sigma, settings=settings,
        )


def random_admissible_pair(
    grid: Grid1D,
    rng: np.random.Generator,
    depth: float = 1.0,
    bottom_amplitude: float = 0.2,
    surface_amplitude: float = 0.05,
    potential_amplitude: float = 1.0,
    modes: int = 3,
) -> RandomPair:
    """
    Draw two smooth configurations on one window.

    Bottoms, surfaces and potentials are sums of the lowest sine/cosine modes
    (whole periods on a periodic grid) with decaying random coefficients.
    The minimum depth h0 is half the smallest depth of the two, and the
    surfaces stay within h0/2 of each other.
    """
    b = -depth + _low_modes(grid, rng, bottom_amplitude, modes)
    b0 = -depth + _low_modes(grid, rng, bottom_amplitude, modes)
    zeta = _low_modes(grid, rng, surface_amplitude, modes)
    zeta0 = _low_modes(grid, rng, surface_amplitude, modes)
    psi = _low_modes(grid, rng, potential_amplitude, modes)
    psi0 = psi + _low_modes(grid, rng, 0.1 * potential_amplitude, modes)
    h0 = 0.5 * min(float(np.min(zeta - b)), float(np.min(zeta0 - b0)))
    gap = float(np.max(np.abs(zeta - zeta0)))
    if gap > 0.5 * h0:
        zeta0 = zeta + (zeta0 - zeta) * (0.5 * h0 / gap)
    return RandomPair(
        b=ScalarField(grid, b),
        zeta=ScalarField(grid, zeta),
        psi=ScalarField(grid, psi),
        b0=ScalarField(grid, b0),
        zeta0=ScalarField(grid, zeta0),
        psi0=ScalarField(grid, psi0),
        h0=h0,
    )
