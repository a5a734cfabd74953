from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .arrays import FloatArray, require_ndim
from .batch import Batch
from .network import Network

ROW_SUM_TOL = 1e-10


class FederationHyper(BaseModel):
    beta: float = Field(default=0.1, ge=0.0)  # prior weight
    lam: float = Field(default=0.5, ge=0.0)  # peer coupling weight
    eta: float = Field(default=0.05, gt=0.0)
    damping: float = Field(default=1e-6, gt=0.0)
    max_step: float = Field(default=0.25, gt=0.0)  # trust radius per local step
    init_jitter: float = Field(default=0.0, ge=0.0)
    local_steps: int = Field(default=1, ge=1)
    preconditioner: Literal["fisher", "identity"] = "fisher"


class FederationState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    foundation: Network
    clients: list[Network] = Field(min_length=2)
    alpha: FloatArray
    anchors: frozenset[int] = frozenset()
    anchor_digests: dict[int, str] = Field(default_factory=dict)
    hyper: FederationHyper
    probe_set: FloatArray
    partitions: list[Batch]
    round: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_state(self) -> "FederationState":
        K = len(self.clients)
        if self.alpha.shape != (K, K):
            raise ValueError(f"alpha must be {K}x{K}, got {self.alpha.shape}")
        if np.any(self.alpha < 0.0) or np.any(np.diag(self.alpha) != 0.0):
            raise ValueError("alpha must be non-negative with a zero diagonal")
        if np.any(np.abs(self.alpha.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ValueError("every alpha row must sum to 1")
        if not self.foundation.has_softmax_head:
            raise ValueError("federated clients need a softmax head")
        for i, client in enumerate(self.clients):
            if not client.same_architecture(self.foundation):
                raise ValueError(
                    f"client {i} differs in architecture from the foundation"
                )
        if len(self.partitions) != K:
            raise ValueError("need one data partition per client")
        if any(a < 0 or a >= K for a in self.anchors):
            raise ValueError("anchor index out of range")
        if set(self.anchor_digests) != set(self.anchors):
            raise ValueError("every anchor needs exactly one recorded digest")
        require_ndim(self.probe_set, 2, "probe_set")
        if self.probe_set.shape[0] == 0:
            raise ValueError("probe set must be nonempty")
        return self

    @property
    def K(self) -> int:
        return len(self.clients)


class ClientMetrics(BaseModel):
    client: int
    local_loss: float
    kl_mixture: float = Field(ge=0.0)
    grad_norm: float = Field(ge=0.0)
    anchor: bool


class RoundMetrics(BaseModel):
    round: int
    clients: list[ClientMetrics]
    symmetric_kl: list[list[float]]
    equilibrium_score: float = Field(ge=0.0)

    @model_validator(mode="after")
    def _symmetric(self) -> "RoundMetrics":
        M = np.asarray(self.symmetric_kl)
        if M.size and (not np.array_equal(M, M.T) or np.any(np.diag(M) != 0.0)):
            raise ValueError("symmetric KL matrix must be symmetric with zero diagonal")
        return self


class FixedPointCheck(BaseModel):
    grad_norms: dict[int, float]
    tol: float
    converged: bool
