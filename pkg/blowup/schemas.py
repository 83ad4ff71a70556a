from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator


# Lotka-Volterra records
class EquilibriumInfo(BaseModel):
    lam: float
    x_star: float = Field(..., gt=0)
    y_star: float = Field(..., gt=0)
    jacobian: List[List[float]]
    trace: float
    det: float
    eigenvalues: List[Tuple[float, float]]  # (real, imag) pairs
    derivative: float  # f'_y(y*; lambda)
    stability_sign: int

    def eigvals(self) -> np.ndarray:
        return np.array([complex(re, im) for re, im in self.eigenvalues])


class ConditionViolation(BaseModel):
    condition: str = Field(..., pattern="^(3a|3b|4|5)$")
    y: Optional[float] = None


class ConditionReport(BaseModel):
    system: str
    cond_3a: bool
    cond_3b: bool
    cond_4: bool
    cond_5: bool
    derivative_at_0: float
    derivative_at_1: float
    margin_4: float
    margin_5: float
    extinction_at_0: bool
    extinction_at_1: bool
    grid_size: int
    grid_min: float
    grid_max: float
    first_violation: Optional[ConditionViolation] = None
    finite_difference_derivative: bool = False

    @computed_field
    @property
    def all_passed(self) -> bool:
        return self.cond_3a and self.cond_3b and self.cond_4 and self.cond_5


# Planar branch records
class BranchVerdict(str, Enum):
    BLEW_UP = "BlewUp"
    REACHED_LAMBDA_BOUND = "ReachedLambdaBound"
    STALLED = "Stalled"


class BranchPoint(BaseModel):
    lam: float
    amplitude: float = Field(..., ge=0)
    period: float = Field(..., gt=0)
    anchor_u: float
    anchor_v: float
    multiplier: float


class LadderRung(BaseModel):
    threshold: float
    met: bool
    amplitude: Optional[float] = None


class HopfScalingFit(BaseModel):
    coefficient: float
    r_squared: float
    points: int


class PlanarBranch(BaseModel):
    system: str
    points: List[BranchPoint]
    verdict: BranchVerdict
    verdict_lambda: Optional[float] = None
    reason: str = ""
    amplitude_cap: float
    hopf_lambda: Optional[float] = None
    cycle_side: Optional[str] = Field(None, pattern="^(below|above)$")
    cycle_stability: Optional[str] = Field(None, pattern="^(stable|unstable)$")
    escape_norm: Optional[float] = None
    cap_reached: bool = False
    ladder: List[LadderRung] = Field(default_factory=list)
    hopf_fit: Optional[HopfScalingFit] = None


# Harmonic balance records
class SearchBox(BaseModel):
    w_lo: float
    w_hi: float
    lam_lo: float
    lam_hi: float

    @model_validator(mode="after")
    def _ordered(self):
        if not (self.w_lo < self.w_hi and self.lam_lo < self.lam_hi):
            raise ValueError("search box bounds must be ordered lo < hi")
        return self


class TheoremReport(BaseModel):
    q: float
    n_harmonics: int
    grid_density: int
    effective_box: SearchBox
    expansions: int
    sublevel_points: int
    components: int
    holes: int
    boundary_margin: float
    root_count: int
    root_w: Optional[float] = None
    root_lambda: Optional[float] = None
    det_margin: float
    worst_resonant_n: int
    nonresonance_margin: float
    domain_ok: bool
    root_ok: bool
    jacobian_ok: bool
    nonresonance_ok: bool

    @computed_field
    @property
    def all_passed(self) -> bool:
        return self.domain_ok and self.root_ok and self.jacobian_ok and self.nonresonance_ok


class LipschitzReport(BaseModel):
    label: str
    probes: int
    zero_ok: bool
    k_declared: float
    k_observed: float
    l_declared: float
    l_observed: float
    k_ok: bool
    l_ok: bool


class TripleRecord(BaseModel):
    u: float
    v: float
    cos0: float
    cos: List[float]  # harmonics 2..N
    sin: List[float]


class HBBranchPoint(BaseModel):
    r: float = Field(..., gt=0)
    lam: float
    w: float = Field(..., gt=0)
    triple: TripleRecord
    sup_norm_x: float
    residual: float
    contraction_estimate: float
    contracting: bool
    iterations: int


class HBBranch(BaseModel):
    root_w: float
    root_lambda: float
    points: List[HBBranchPoint]
    lambda_lipschitz: float
    w_lipschitz: float
    x_lipschitz: float


class ValidationReport(BaseModel):
    r: float
    lam: float
    w: float
    n_harmonics: int
    m_check: int
    spectral_residual: float
    time_domain_mismatch: float
    period: float


# Input file records
class SystemRecord(BaseModel):
    """One section of a system catalog file."""

    name: str = Field(..., min_length=1)
    a: float = Field(..., gt=0)
    b: float = Field(..., gt=0)
    c: float = Field(..., gt=0)
    d: float = Field(..., gt=0)
    term: str = Field(
        ..., pattern="^(arctan_linear|quad_logistic|cubic_logistic|polynomial)$"
    )
    coeffs: List[float] = Field(default_factory=list)
    lambda_coeffs: List[float] = Field(default_factory=list)
    branch_from: Optional[float] = Field(None, ge=0, le=1)
    branch_to: Optional[float] = Field(None, ge=0, le=1)

    @model_validator(mode="after")
    def _polynomial_terms(self):
        if self.term == "polynomial" and not (self.coeffs or self.lambda_coeffs):
            raise ValueError("polynomial terms need coeffs and/or lambda_coeffs")
        return self


class SymbolRecord(BaseModel):
    degree: int = Field(..., ge=2)
    coefficients: List[List[float]]  # coefficients[k]: a_k(lambda), ascending in lambda
    root_w: Optional[float] = Field(None, gt=0)
    root_lambda: Optional[float] = None

    @model_validator(mode="after")
    def _one_list_per_coefficient(self):
        if len(self.coefficients) != self.degree:
            raise ValueError(
                f"degree {self.degree} needs a0..a{self.degree - 1}, "
                f"got {len(self.coefficients)} coefficient lists"
            )
        return self


class NonlinearityRecord(BaseModel):
    kind: str = Field("zero", pattern="^(zero|linear|saturating_cubic|damped_sine)$")
    epsilon: float = 0.0
    lambda_bound: float = Field(1.0, gt=0)


# Command-line records
class RunConfig(BaseModel):
    """Everything a subcommand ran with; echoed into summary.json."""

    model_config = ConfigDict(extra="forbid")

    subcommand: str = Field(
        ...,
        pattern="^(lv-hopf|lv-check|lv-simulate|lv-branch|hb-root|hb-check|hb-branch|hb-validate)$",
    )
    system_file: Optional[Path] = None
    system_name: Optional[str] = None
    symbol_file: Optional[Path] = None
    output_dir: Path
    emit_svg: bool = False

    # lv
    lambda_lo: float = 0.0
    lambda_hi: float = 1.0
    hopf_tol: float = Field(1e-12, gt=0)
    grid_points: int = Field(200, ge=2)
    lam: Optional[float] = None
    x0: Optional[float] = None
    y0: Optional[float] = None
    t_end: float = Field(50.0, gt=0)
    rtol: float = Field(1e-10, gt=0)
    atol: float = Field(1e-12, gt=0)
    lambda_from: Optional[float] = None
    lambda_to: Optional[float] = None
    step0: float = Field(0.01, gt=0)
    cap: float = Field(50.0, gt=0)
    cycle_tol: float = Field(1e-8, gt=0)

    # hb
    seed_w: Optional[float] = None
    seed_lambda: Optional[float] = None
    q: float = Field(0.5, gt=0)
    box: Optional[SearchBox] = None
    grid_density: int = Field(201, ge=5)
    max_expansions: int = Field(2, ge=0)
    n_harmonics: int = Field(32, ge=4)
    m_grid: int = 128
    m_check: int = 512
    fixed_point_tol: float = Field(1e-12, gt=0)
    max_iter: int = Field(200, ge=1)
    r: float = Field(1.0, gt=0)
    r_min: float = Field(1e-3, gt=0)
    r_max: float = Field(1e3, gt=0)
    r_points: int = Field(61, ge=2)
    nonlinearity: Optional[str] = None
    epsilon: Optional[float] = None

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.m_grid < 2 * self.n_harmonics + 2:
            raise ValueError("M must be at least 2N + 2")
        if self.m_check < 2 * self.n_harmonics + 2:
            raise ValueError("M_check must be at least 2N + 2")
        if not self.lambda_lo < self.lambda_hi:
            raise ValueError("lambda range must be ordered")
        if not self.r_min < self.r_max:
            raise ValueError("r range must be ordered")
        if self.lambda_from is not None and self.lambda_to is not None:
            if self.lambda_from == self.lambda_to:
                raise ValueError("branch lambda range is empty")
        return self
