from enum import StrEnum


class Activation(StrEnum):
    TANH = "tanh"
    RELU = "relu"
    IDENTITY = "identity"
    SOFTMAX = "softmax"  # head only; must be the final layer
