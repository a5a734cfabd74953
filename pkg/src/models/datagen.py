from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.enums import DataAxis, FunctionClass

from .arrays import FloatArray, IntArray, require_ndim


class LinearParams(BaseModel):
    kind: Literal["L"] = "L"
    weights: list[float] | None = None  # drawn from the seed when omitted
    bias: float = 0.0


class PolynomialParams(BaseModel):
    """Separable polynomial ``sum_d sum_j c_j x_d^j``; default is ``sum_d x_d^k``."""

    kind: Literal["P"] = "P"
    degree: int = Field(default=2, ge=2)
    coefficients: list[float] | None = None  # c_0..c_k

    @model_validator(mode="after")
    def _coefficients_match_degree(self) -> "PolynomialParams":
        if self.coefficients is not None:
            if len(self.coefficients) != self.degree + 1:
                raise ValueError("need degree + 1 coefficients")
            if self.coefficients[-1] == 0.0:
                raise ValueError("leading coefficient must be nonzero")
        return self


class CompositionParams(BaseModel):
    """Alternating ``sin``/``tanh`` composition, starting with ``sin``."""

    kind: Literal["H"] = "H"
    depth: int = Field(default=3, ge=1)
    frequency: float = Field(default=3.0, gt=0.0)


class PiecewiseParams(BaseModel):
    """Piecewise-linear in ``x_0`` with a jump at each breakpoint."""

    kind: Literal["D"] = "D"
    breakpoints: list[float] = Field(default_factory=lambda: [0.0])
    jumps: list[float] = Field(default_factory=lambda: [1.0])
    slope: float = 0.0

    @model_validator(mode="after")
    def _check_pieces(self) -> "PiecewiseParams":
        if not self.breakpoints:
            raise ValueError("a discontinuous function needs at least two pieces")
        if len(self.jumps) != len(self.breakpoints):
            raise ValueError("need one jump per breakpoint")
        if sorted(self.breakpoints) != self.breakpoints:
            raise ValueError("breakpoints must be increasing")
        if any(not -1.0 < b < 1.0 for b in self.breakpoints):
            raise ValueError("breakpoints must lie inside (-1, 1)")
        return self

    @property
    def pieces(self) -> int:
        return len(self.breakpoints) + 1


FunctionParams = Annotated[
    LinearParams | PolynomialParams | CompositionParams | PiecewiseParams,
    Field(discriminator="kind"),
]


class FunctionSpec(BaseModel):
    params: FunctionParams
    dim: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_dims(self) -> "FunctionSpec":
        if isinstance(self.params, LinearParams) and self.params.weights is not None:
            if len(self.params.weights) != self.dim:
                raise ValueError("linear weights must have one entry per dimension")
        return self

    @property
    def function_class(self) -> FunctionClass:
        return FunctionClass(self.params.kind)


class Box(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    low: FloatArray
    high: FloatArray

    @model_validator(mode="after")
    def _check_bounds(self) -> "Box":
        require_ndim(self.low, 1, "low")
        if self.low.shape != self.high.shape or np.any(self.high <= self.low):
            raise ValueError("box needs matching bounds with high > low")
        return self

    @property
    def volume(self) -> float:
        return float(np.prod(self.high - self.low))


class Dataset(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    inputs: FloatArray  # [n x dim]
    outputs: FloatArray  # [n]
    piece_ids: IntArray  # [n]

    @model_validator(mode="after")
    def _check_rows(self) -> "Dataset":
        require_ndim(self.inputs, 2, "inputs")
        n = self.inputs.shape[0]
        if self.outputs.shape != (n,) or self.piece_ids.shape != (n,):
            raise ValueError("outputs and piece_ids need one entry per input row")
        return self

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(
            inputs=self.inputs[index],
            outputs=self.outputs[index],
            piece_ids=self.piece_ids[index],
        )


class ComplexityReport(BaseModel):
    curvature_terms: list[float]
    boundary_terms: list[float]
    c_nonlinear: float = Field(ge=0.0)
    c_data_batch: float | None = None

    @model_validator(mode="after")
    def _total_is_sum(self) -> "ComplexityReport":
        parts = self.curvature_terms + self.boundary_terms
        if any(t < 0 for t in parts):
            raise ValueError("complexity terms must be non-negative")
        if abs(sum(parts) - self.c_nonlinear) > 1e-10 * max(1.0, self.c_nonlinear):
            raise ValueError("c_nonlinear must equal the sum of its terms")
        if self.c_data_batch is not None and self.c_data_batch < 0:
            raise ValueError("c_data_batch must be non-negative")
        return self


class AxisScorer(BaseModel):
    """Per-sample ``S_data = offset + sum_a w_a * tag_a`` over data axes."""

    weights: dict[DataAxis, float] = Field(
        default_factory=lambda: {axis: 1.0 for axis in DataAxis}
    )
    offset: float = 0.0
