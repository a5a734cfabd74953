from abc import ABC, abstractmethod
from collections.abc import Callable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .arrays import FloatArray
from .network import Network

WEIGHT_SLACK = 1e-12


class BoundaryWeights(BaseModel):
    """Mixing weights of the unified objective; ``1 - alpha - beta`` goes to SFT."""

    alpha: float = Field(ge=0.0)
    beta: float = Field(ge=0.0)

    @model_validator(mode="after")
    def _check_simplex(self) -> "BoundaryWeights":
        if self.alpha + self.beta > 1.0 + WEIGHT_SLACK:
            raise ValueError(
                f"alpha + beta must not exceed 1, got {self.alpha + self.beta}"
            )
        return self

    @property
    def supervised(self) -> float:
        return max(0.0, 1.0 - self.alpha - self.beta)


class Reward(BaseModel, ABC):
    """Scalar signal on a model output vector."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @abstractmethod
    def __call__(self, output: np.ndarray) -> float: ...

    def gradient(self, output: np.ndarray, step: float = 1e-6) -> np.ndarray:
        """Central-difference gradient; built-in rewards override it."""
        output = np.asarray(output, dtype=float)
        grad = np.empty_like(output)
        for i in range(output.size):
            bump = np.zeros_like(output)
            bump[i] = step
            grad[i] = (self(output + bump) - self(output - bump)) / (2.0 * step)
        return grad


class NegativeSquaredDistance(Reward):
    target: FloatArray

    def __call__(self, output: np.ndarray) -> float:
        diff = np.asarray(output, dtype=float) - self.target
        return float(-np.dot(diff, diff))

    def gradient(self, output: np.ndarray, step: float = 1e-6) -> np.ndarray:
        return -2.0 * (np.asarray(output, dtype=float) - self.target)


class ConstantReward(Reward):
    reward: float

    def __call__(self, output: np.ndarray) -> float:
        return self.reward

    def gradient(self, output: np.ndarray, step: float = 1e-6) -> np.ndarray:
        return np.zeros_like(np.asarray(output, dtype=float))


class CallableReward(Reward):
    """Black-box reward; its gradient always comes from finite differences."""

    fn: Callable[[np.ndarray], float]

    def __call__(self, output: np.ndarray) -> float:
        return float(self.fn(np.asarray(output, dtype=float)))


class WeakBoundaryPoint(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x: FloatArray
    eps: float = Field(ge=0.0)
    reward: Reward


class WeakBoundarySet(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    points: list[WeakBoundaryPoint] = Field(default_factory=list)

    @model_validator(mode="after")
    def _same_width(self) -> "WeakBoundarySet":
        if len({p.x.shape for p in self.points}) > 1:
            raise ValueError("all boundary points must share one input width")
        return self

    @property
    def total_eps(self) -> float:
        return float(sum(p.eps for p in self.points))

    def inputs(self) -> np.ndarray:
        return np.stack([p.x for p in self.points])


class IntentionCost(BaseModel):
    """Squared distance of the output on an instruction probe to a target."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    probe: FloatArray
    target: FloatArray


class Stage2Result(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    network: Network
    base_curve: list[float]
    boundary_curve: list[float]
