import hashlib
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.enums import Activation

from .arrays import FloatArray, require_finite, require_ndim


class Layer(BaseModel):
    """One dense layer: ``activation(W @ h + b)``."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    weight: FloatArray  # [out x in]
    bias: FloatArray  # [out]
    activation: Activation = Activation.TANH

    @model_validator(mode="after")
    def _check_shapes(self) -> "Layer":
        require_ndim(self.weight, 2, "weight")
        require_ndim(self.bias, 1, "bias")
        if self.weight.shape[0] != self.bias.shape[0]:
            raise ValueError(
                f"bias length {self.bias.shape[0]} does not match "
                f"weight rows {self.weight.shape[0]}"
            )
        if self.weight.shape[0] == 0 or self.weight.shape[1] == 0:
            raise ValueError("layer dimensions must be positive")
        require_finite(self.weight, "weight")
        require_finite(self.bias, "bias")
        return self

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])

    @property
    def n_params(self) -> int:
        return self.weight.size + self.bias.size


class Network(BaseModel):
    """Small dense feed-forward network.

    Parameters flatten layer by layer as ``W.ravel()`` (row-major) followed by
    ``b``; ``parameters`` and ``with_parameters`` are exact inverses.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    layers: list[Layer] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_chain(self) -> "Network":
        for k in range(1, len(self.layers)):
            prev, cur = self.layers[k - 1], self.layers[k]
            if prev.out_dim != cur.in_dim:
                raise ValueError(
                    f"layer {k - 1} outputs {prev.out_dim} but layer {k} "
                    f"expects {cur.in_dim}"
                )
        for k, layer in enumerate(self.layers[:-1]):
            if layer.activation == Activation.SOFTMAX:
                raise ValueError(f"softmax head only allowed last, found at layer {k}")
        return self

    # -- shape ------------------------------------------------------------
    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def is_square(self) -> bool:
        return self.input_dim == self.output_dim

    @property
    def has_softmax_head(self) -> bool:
        return self.layers[-1].activation == Activation.SOFTMAX

    @property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers)

    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [layer.out_dim for layer in self.layers]

    def same_architecture(self, other: "Network") -> bool:
        return [(la.weight.shape, la.activation) for la in self.layers] == [
            (lb.weight.shape, lb.activation) for lb in other.layers
        ]

    # -- flat parameter view ---------------------------------------------
    def parameters(self) -> np.ndarray:
        return np.concatenate(
            [np.concatenate([la.weight.ravel(), la.bias]) for la in self.layers]
        )

    def with_parameters(self, theta: np.ndarray) -> "Network":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(
                f"expected {self.n_params} parameters, got shape {theta.shape}"
            )
        layers: list[Layer] = []
        offset = 0
        for la in self.layers:
            n_w = la.weight.size
            weight = theta[offset : offset + n_w].reshape(la.weight.shape)
            offset += n_w
            bias = theta[offset : offset + la.out_dim]
            offset += la.out_dim
            layers.append(Layer(weight=weight, bias=bias, activation=la.activation))
        return Network(layers=layers)

    def digest(self) -> str:
        """sha256 over the raw parameter bytes; equal iff bit-identical."""
        return hashlib.sha256(self.parameters().tobytes()).hexdigest()

    # -- constructors -----------------------------------------------------
    @classmethod
    def initialize(
        cls,
        sizes: Sequence[int],
        activations: Sequence[Activation | str],
        rng: np.random.Generator,
        scale: float = 1.0,
    ) -> "Network":
        """Gaussian Glorot-style weights times ``scale``, zero biases."""
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        layers = []
        for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
            std = scale * np.sqrt(2.0 / (fan_in + fan_out))
            layers.append(
                Layer(
                    weight=rng.normal(0.0, std, size=(fan_out, fan_in)),
                    bias=np.zeros(fan_out),
                    activation=Activation(act),
                )
            )
        return cls(layers=layers)

    @classmethod
    def linear(cls, matrix, bias=None) -> "Network":
        """Single identity-activation layer ``h = A x + b``."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if bias is None:
            bias = np.zeros(matrix.shape[0])
        return cls(
            layers=[Layer(weight=matrix, bias=bias, activation=Activation.IDENTITY)]
        )
