"""Differentiable objectives over a network and a batch.

A ``LossSpec`` returns the mean loss over a batch together with its exact
gradient w.r.t. the flat parameter vector. Specs specific to one experiment
(boundary terms, contrastive, federated) live in the module that uses them
and build on the same base.
"""

from abc import ABC, abstractmethod

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.errors import DimensionMismatchError, PreconditionError
from src.models import Batch, Network
from src.nncore import backprop, head_vjp, log_softmax, propagate


class LossSpec(BaseModel, ABC):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @abstractmethod
    def value_and_grad(self, net: Network, batch) -> tuple[float, np.ndarray]:
        """Mean loss over ``batch`` and its gradient w.r.t. ``net.parameters()``."""

    def value(self, net: Network, batch) -> float:
        return self.value_and_grad(net, batch)[0]


def _mean_squared_distance(
    net: Network, inputs: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    states, pres = propagate(net, inputs)
    diff = states[-1] - targets
    n = inputs.shape[0]
    value = float(np.sum(diff * diff) / n)
    dz = head_vjp(net, states, pres, 2.0 * diff / n)
    return value, backprop(net, states, pres, dz)


class ResidualLoss(LossSpec):
    """Mean squared fixed-point residual ``||f(x) - x||^2``."""

    def value_and_grad(self, net: Network, batch: Batch) -> tuple[float, np.ndarray]:
        if not net.is_square:
            raise DimensionMismatchError(
                "residual needs a square network, "
                f"got {net.input_dim}->{net.output_dim}"
            )
        return _mean_squared_distance(net, batch.inputs, batch.inputs)


class SquaredErrorLoss(LossSpec):
    """Mean squared error against vector targets."""

    def value_and_grad(self, net: Network, batch: Batch) -> tuple[float, np.ndarray]:
        if batch.targets is None:
            raise PreconditionError("squared-error loss needs batch targets")
        if batch.targets.shape[1] != net.output_dim:
            raise DimensionMismatchError(
                f"targets have width {batch.targets.shape[1]}, "
                f"network outputs {net.output_dim}"
            )
        return _mean_squared_distance(net, batch.inputs, batch.targets)


def check_labels(net: Network, labels: np.ndarray | None) -> np.ndarray:
    if not net.has_softmax_head:
        raise PreconditionError("class targets need a softmax head")
    if labels is None:
        raise PreconditionError("cross-entropy needs batch labels")
    if labels.size and (labels.min() < 0 or labels.max() >= net.output_dim):
        raise PreconditionError(
            f"labels must lie in [0, {net.output_dim}), "
            f"got range [{labels.min()}, {labels.max()}]"
        )
    return labels


class CrossEntropyLoss(LossSpec):
    """Mean negative log-likelihood of the labels under a softmax head."""

    def value_and_grad(self, net: Network, batch: Batch) -> tuple[float, np.ndarray]:
        labels = check_labels(net, batch.labels)
        states, pres = propagate(net, batch.inputs)
        n = len(batch)
        rows = np.arange(n)
        logp = log_softmax(pres[-1])
        value = float(-np.sum(logp[rows, labels]) / n)
        dz = states[-1].copy()
        dz[rows, labels] -= 1.0
        return value, backprop(net, states, pres, dz / n)


class ScaledLoss(LossSpec):
    base: LossSpec
    factor: float

    def value_and_grad(self, net: Network, batch) -> tuple[float, np.ndarray]:
        value, grad = self.base.value_and_grad(net, batch)
        return self.factor * value, self.factor * grad


class SumLoss(LossSpec):
    terms: list[LossSpec]

    def value_and_grad(self, net: Network, batch) -> tuple[float, np.ndarray]:
        total = 0.0
        grad = np.zeros(net.n_params)
        for term in self.terms:
            value, g = term.value_and_grad(net, batch)
            total += value
            grad = grad + g
        return total, grad
