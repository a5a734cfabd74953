import math

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .arrays import FloatArray
from .network import Network


class FixedPointReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    point: FloatArray
    residual_norm: float = Field(ge=0.0)
    jacobian_radius: float = Field(ge=0.0)
    stable: bool
    iterations_used: int = Field(ge=0)
    basin_seeds: list[FloatArray] = Field(default_factory=list)

    @model_validator(mode="after")
    def _stable_matches_radius(self) -> "FixedPointReport":
        if self.stable != (self.jacobian_radius < 1.0):
            raise ValueError(
                f"stable={self.stable} contradicts radius {self.jacobian_radius}"
            )
        return self


class NoiseSpec(BaseModel):
    """Additive per-step noise ``delta_t ~ N(shift, sigma^2 I)``."""

    sigma: float = Field(default=0.0, ge=0.0)
    shift: list[float] | None = None


class IterationResult(BaseModel):
    """Outcome of ``h_{t+1} = f(h_t) + delta_t``; exactly one verdict holds."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    path: list[FloatArray]
    converged: bool
    diverged: bool
    steps: int = Field(ge=0)
    report: FixedPointReport | None = None

    @model_validator(mode="after")
    def _one_verdict(self) -> "IterationResult":
        if self.converged and self.diverged:
            raise ValueError("an iteration cannot both converge and diverge")
        if self.converged != (self.report is not None):
            raise ValueError("a report is attached exactly when converged")
        return self


class ContractionReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    point: FloatArray
    residual_norm: float
    radius: float
    stable: bool
    # None where a layer Jacobian is not square (width changes)
    layer_radii: list[float | None]
    layer_norms: list[float]


class PerturbationReport(BaseModel):
    rho_base: float
    rho_perturbed: float
    eps: float = Field(ge=0.0)
    accelerated: bool

    @model_validator(mode="after")
    def _flag_matches(self) -> "PerturbationReport":
        if self.accelerated != (self.rho_perturbed < self.rho_base):
            raise ValueError("accelerated flag contradicts the reported radii")
        return self


class PreconditionedStep(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    theta: FloatArray
    effective_jacobian: FloatArray | None = None
    effective_radius: float | None = None


class FixedPointEnumeration(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    fixed_points: list[FixedPointReport]
    divergent_seeds: list[FloatArray] = Field(default_factory=list)
    unconverged_seeds: list[FloatArray] = Field(default_factory=list)
    merge_radius: float


class LagrangianState(BaseModel):
    """One step of the constrained run: ``L = E + lambda*g + mu/2 * g^2``."""

    energy: float
    constraint_value: float
    multiplier: float
    step: int = Field(ge=0)

    @field_validator("multiplier", "constraint_value", "energy")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Lagrangian quantities must be finite")
        return v


class LagrangianResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    network: Network
    history: list[LagrangianState]
    budget: float = Field(gt=0.0)
    converged: bool
    stationarity_norm: float


class TrainingResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    network: Network
    loss_curve: list[float]
