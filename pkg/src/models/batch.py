import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .arrays import FloatArray, IntArray, require_finite, require_ndim


class Batch(BaseModel):
    """Rows of inputs with optional class labels and/or regression targets."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    inputs: FloatArray  # [n x d]
    labels: IntArray | None = None  # [n]
    targets: FloatArray | None = None  # [n x m]

    @model_validator(mode="after")
    def _check_rows(self) -> "Batch":
        require_ndim(self.inputs, 2, "inputs")
        require_finite(self.inputs, "inputs")
        n = self.inputs.shape[0]
        if self.labels is not None:
            require_ndim(self.labels, 1, "labels")
            if self.labels.shape[0] != n:
                raise ValueError("labels and inputs differ in length")
        if self.targets is not None:
            require_ndim(self.targets, 2, "targets")
            require_finite(self.targets, "targets")
            if self.targets.shape[0] != n:
                raise ValueError("targets and inputs differ in length")
        return self

    @classmethod
    def of(cls, inputs, labels=None, targets=None) -> "Batch":
        """Build from loosely shaped data; 1-D inputs become a column."""
        inputs = np.asarray(inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs[:, None]
        if targets is not None:
            targets = np.asarray(targets, dtype=float)
            if targets.ndim == 1:
                targets = targets[:, None]
        return cls(inputs=inputs, labels=labels, targets=targets)

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    def subset(self, index) -> "Batch":
        index = np.asarray(index, dtype=np.int64)
        return Batch(
            inputs=self.inputs[index],
            labels=None if self.labels is None else self.labels[index],
            targets=None if self.targets is None else self.targets[index],
        )


class ContrastiveBatch(BaseModel):
    """Anchor/positive pairs with ``m`` negatives per anchor."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    anchors: FloatArray  # [n x d]
    positives: FloatArray  # [n x d]
    negatives: FloatArray  # [n x m x d]

    @model_validator(mode="after")
    def _check_shapes(self) -> "ContrastiveBatch":
        require_ndim(self.anchors, 2, "anchors")
        require_ndim(self.negatives, 3, "negatives")
        if self.positives.shape != self.anchors.shape:
            raise ValueError("positives must match anchors")
        n, m, d = self.negatives.shape
        if n != self.anchors.shape[0] or d != self.anchors.shape[1]:
            raise ValueError("negatives must be [n x m x d] matching anchors")
        if m == 0:
            raise ValueError("at least one negative per anchor is required")
        return self

    def __len__(self) -> int:
        return int(self.anchors.shape[0])
