import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .arrays import FloatArray, require_finite, require_ndim
from .network import Network


class GaussianComponent(BaseModel):
    """Gaussian field ``exp(-(x-mu)^T Sigma^-1 (x-mu) / 2)`` and its level ``c``."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mu: FloatArray
    sigma: FloatArray
    level: float = Field(gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_covariance(self) -> "GaussianComponent":
        require_ndim(self.mu, 1, "mu")
        require_ndim(self.sigma, 2, "sigma")
        require_finite(self.mu, "mu")
        require_finite(self.sigma, "sigma")
        d = self.mu.shape[0]
        if self.sigma.shape != (d, d):
            raise ValueError(f"sigma must be {d}x{d}, got {self.sigma.shape}")
        if not np.allclose(self.sigma, self.sigma.T, rtol=0.0, atol=1e-12):
            raise ValueError("sigma must be symmetric")
        try:
            np.linalg.cholesky(self.sigma)
        except np.linalg.LinAlgError as e:
            raise ValueError("sigma must be positive definite") from e
        return self

    @property
    def dim(self) -> int:
        return int(self.mu.shape[0])

    def precision(self) -> np.ndarray:
        return np.linalg.inv(self.sigma)


class Checkpoint(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    step: int = Field(ge=0)
    network: Network


class RigidityPoint(BaseModel):
    step: int
    R: float = Field(ge=0.0)
    C_eff: float = Field(gt=0.0)
    n_components: int


class RigidityCurve(BaseModel):
    C0: float = Field(gt=0.0)
    points: list[RigidityPoint]

    @model_validator(mode="after")
    def _capacity_formula(self) -> "RigidityCurve":
        for p in self.points:
            if p.C_eff != self.C0 / (1.0 + p.R):
                raise ValueError(f"C_eff at step {p.step} is not C0 / (1 + R)")
            if p.C_eff > self.C0:
                raise ValueError("C_eff cannot exceed C0")
        return self


class LevelSetSample(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: FloatArray  # [accepted x dim]
    requested: int
    draws: int
    band: float

    @property
    def accepted(self) -> int:
        return int(self.points.shape[0])

    @property
    def shortfall(self) -> int:
        return max(0, self.requested - self.accepted)
