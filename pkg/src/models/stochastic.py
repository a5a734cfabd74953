import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .arrays import FloatArray


class InputSampler(BaseModel):
    """Independent coordinates, each normal or uniform with a given mean and std."""

    kind: Literal["normal", "uniform"] = "normal"
    mean: list[float]
    std: list[float]

    @model_validator(mode="after")
    def _check_lengths(self) -> "InputSampler":
        if len(self.mean) != len(self.std) or not self.mean:
            raise ValueError("mean and std must be nonempty and equally long")
        if any(s < 0 for s in self.std):
            raise ValueError("std must be non-negative")
        return self

    @property
    def dim(self) -> int:
        return len(self.mean)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        mean = np.asarray(self.mean)
        std = np.asarray(self.std)
        if self.kind == "normal":
            return mean + std * rng.standard_normal((n, self.dim))
        half_width = std * math.sqrt(3.0)
        return mean + half_width * rng.uniform(-1.0, 1.0, size=(n, self.dim))


class ActivationStats(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    layer: int
    n_samples: int
    mean: FloatArray
    variance: FloatArray
    mean_se: FloatArray
    variance_se: FloatArray
    analytic_mean: FloatArray | None = None
    analytic_variance: FloatArray | None = None


class DeviationEvent(BaseModel):
    """Indicator ``lower < features[:, feature] <= upper`` (open-ended if None)."""

    feature: int = Field(ge=0)
    lower: float | None = None
    upper: float | None = None

    def indicator(self, features: np.ndarray) -> np.ndarray:
        column = features[:, self.feature]
        mask = np.ones(column.shape[0], dtype=bool)
        if self.lower is not None:
            mask &= column > self.lower
        if self.upper is not None:
            mask &= column <= self.upper
        return mask


class DeviationSpec(BaseModel):
    events: list[DeviationEvent] = Field(min_length=1)

    @property
    def count(self) -> int:
        return len(self.events)


class UnionBoundResult(BaseModel):
    n_samples: int
    p_events: list[float]
    p_union: float
    sum_p_i: float
    slack: float = Field(ge=0.0)
    bonferroni_lower: float
    holds: bool


class ContractionFit(BaseModel):
    """Least-squares fit of ``e_{j+1} = rho * e_j + xi`` over stacked depths."""

    depth_errors: list[tuple[float, float]]
    rho: float | None
    xi: float | None
    r_squared: float | None
    residuals: list[float]
    degenerate: bool
    contractive: bool

    @model_validator(mode="after")
    def _fit_reproduces_inputs(self) -> "ContractionFit":
        if self.degenerate:
            if self.rho is not None or self.xi is not None:
                raise ValueError("a degenerate fit carries no coefficients")
            return self
        if self.rho is None or self.xi is None:
            raise ValueError("a proper fit needs rho and xi")
        if len(self.residuals) != len(self.depth_errors):
            raise ValueError("one residual per error pair is required")
        for (e_j, e_next), r in zip(self.depth_errors, self.residuals):
            gap = abs(e_next - (self.rho * e_j + self.xi) - r)
            if gap > 1e-9 * max(1.0, abs(e_next)):
                raise ValueError("residuals do not follow from the fitted line")
        return self


class ExpVsUnionRow(BaseModel):
    depth: int
    measured_freq: float
    chain_pred: float
    union_sum: float


class ExpVsUnionReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rows: list[ExpVsUnionRow]
    fixed_point: FloatArray
    radius: float
    threshold: float
    deviation_scale: float
    predicted_scale: float
    epsilon: float
    plateau: bool
    plateau_ratio: float | None


class StochasticFixedPointSummary(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n_draws: int
    mean: FloatArray
    covariance: FloatArray
    std: FloatArray
    mean_se: FloatArray
    quantiles: dict[str, FloatArray]
    noiseless_fixed_point: FloatArray
    noise_mean: FloatArray
    average_fixed_point: FloatArray
    radius: float
