from __future__ import annotations

import enum
import math
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, validator


class Verdict(str, enum.Enum):
    HOLDS = 'HOLDS'
    NON_INFORMATIVE = 'NON_INFORMATIVE'
    VIOLATED = 'VIOLATED'


class Section(BaseModel):
    """
    Base for configuration sections.
    Unknown keys are rejected so typos surface as configuration errors.
    """

    class Config:
        extra = "forbid"


class GridSection(Section):
    """
    Window grid and discretisation settings.
    The window O is [a1, a2] with n_nodes nodes; n_sigma vertical layers.
    """
    a1: float = 0.0
    a2: float = 1.0
    n_nodes: int = 65
    n_sigma: int = 33
    solver: str = "direct"
    solver_tol: float = 1e-10

    @validator("n_nodes", "n_sigma")
    def at_least_three(cls, value):
        if value < 3:
            raise ValueError("must be at least 3")
        return value


class PhysicsSection(Section):
    g: float = 9.81
    h0: float = 0.25


class ProfilesSection(Section):
    """
    Profile expressions over X (and Y for wall data).
    The fields ending in 0 describe the second configuration of a pair.
    """
    bottom: str = "-1"
    surface: str = "0"
    potential: str = "cos(2*pi*X)"
    wall: Optional[str] = None
    bottom0: Optional[str] = None
    surface0: Optional[str] = None
    potential0: Optional[str] = None
    wall0: Optional[str] = None
    initial_surface: str = "0"
    initial_potential: str = "0"


class TimeSection(Section):
    dt: float = 0.01
    t_end: float = 1.0
    t0: Optional[float] = None
    save_every: int = 1

    @validator("dt")
    def positive_step(cls, value):
        if not value > 0:
            raise ValueError("must be positive")
        return value


class WindowSection(Section):
    """
    Mother domain for simulations, in multiples of the window length.
    The window sits at offset_nodes from the mother's left end.
    """
    mother_domain_factor: int = 2
    offset_nodes: Optional[int] = None


class CertificateSection(Section):
    s: float = 0.25
    big_c: float = 1.0
    small_c: float = math.e + 0.01
    cross_traces: str = "direct"
    epsilon: float = 1.0
    epsilons: List[float] = Field(default_factory=lambda: [1e-1, 1e-2, 1e-3])

    @validator("s")
    def exponent_range(cls, value):
        if not 0 < value < 0.5:
            raise ValueError("must lie in (0, 1/2)")
        return value

    @validator("small_c")
    def above_e(cls, value):
        if not value > math.e:
            raise ValueError("must exceed e")
        return value

    @validator("cross_traces")
    def cross_trace_mode(cls, value):
        if value not in ("direct", "bound"):
            raise ValueError("must be 'direct' or 'bound'")
        return value


class InversionSection(Section):
    alpha_reg: float = 1e-6
    max_iters: int = 200
    grad_tol: float = 1e-10
    ftol: float = 0.0
    step_init: float = 0.02
    fd_step: float = 1e-6
    depth_floor: float = 0.1
    memory: int = 10
    init: str = "-1"
    truth: Optional[str] = None
    noise_levels: List[float] = Field(default_factory=list)


class VerifySection(Section):
    pairs: int = 20
    configurations: int = 10
    gradient_nodes: int = 6


class OutputSection(Section):
    directory: Optional[str] = None
    plots: bool = True


class ExperimentConfig(Section):
    """
    Complete experiment description, one model per TOML section.
    Every section has defaults, so an empty document is a valid config.
    """
    grid: GridSection = Field(default_factory=GridSection)
    physics: PhysicsSection = Field(default_factory=PhysicsSection)
    profiles: ProfilesSection = Field(default_factory=ProfilesSection)
    time: TimeSection = Field(default_factory=TimeSection)
    window: WindowSection = Field(default_factory=WindowSection)
    certificate: CertificateSection = Field(default_factory=CertificateSection)
    inversion: InversionSection = Field(default_factory=InversionSection)
    verify: VerifySection = Field(default_factory=VerifySection)
    output: OutputSection = Field(default_factory=OutputSection)


class ComponentCoverage(BaseModel):
    """
    Covering statistics of one inter-bottom component.
    """
    sign: str
    x_start: float
    x_end: float
    area: float
    rho: float
    fat: bool
    n_squares: int = 0
    min_square_energy: Optional[float] = None
    crho: Optional[float] = None
    constant: float = 0.0


class TermBreakdown(BaseModel):
    """
    Every intermediate quantity of the stability estimate.
    Log terms are None when their guard fired.
    """
    lhs_energy: float
    lemma31_rhs: float
    j1: float
    j2: float
    j3: float
    surface_terms: List[float]
    tbot: float
    tlog: Optional[float]
    tlog1: Optional[float]
    g1: float
    ghat1: float
    gtilde1: float
    g2: float
    g3: float
    g4: float
    g5: float
    z3_norm: float
    z4_norm: float
    z5_norm: float
    z6: float
    z7: float
    cbot_estimate: Optional[float]
    crho_estimates: List[float]
    final_rhs: float


class CertificateReport(BaseModel):
    """
    Outcome of the stability estimate for one pair of configurations.
    """
    verdict: Verdict
    lhs: float
    rhs: float
    l1_distance: float
    h2_distance: float
    energies: List[float]
    terms: TermBreakdown
    constants: Dict[str, float]
    grid: Dict[str, float]
    components: List[ComponentCoverage]
    smallness: Dict[str, bool]
    covered: bool = True
    notes: List[str] = Field(default_factory=list)
    seed: Optional[int] = None
    generator: Optional[str] = None


class InversionReport(BaseModel):
    converged: bool
    iterations: int
    misfit_history: List[float]
    l1_error: Optional[float]
    identifiable: bool
    stop_reason: str
