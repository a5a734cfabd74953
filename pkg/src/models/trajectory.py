from pydantic import BaseModel, ConfigDict, Field, model_validator

from .arrays import FloatArray


class Trajectory(BaseModel):
    """Per-layer states ``h_0..h_L`` of one input, plus each layer's pre-activation."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    states: list[FloatArray] = Field(min_length=1)
    pre_activations: list[FloatArray] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_lengths(self) -> "Trajectory":
        if len(self.pre_activations) != len(self.states) - 1:
            raise ValueError("need exactly one pre-activation per layer")
        for k, (z, h) in enumerate(zip(self.pre_activations, self.states[1:])):
            if z.shape != h.shape:
                raise ValueError(f"layer {k} pre-activation/state shapes differ")
        return self

    @property
    def output(self):
        return self.states[-1]

    @property
    def depth(self) -> int:
        return len(self.states) - 1
