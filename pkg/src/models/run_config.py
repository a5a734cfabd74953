"""Run configuration schema.

Every block rejects unknown keys. Omitted blocks and fields take the defaults
below and are written back out in ``resolved_config.json``.
"""

from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.enums import Activation, Subcommand


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Tolerances(StrictModel):
    fd_step: float = Field(default=1e-5, gt=0.0)
    power_tol: float = Field(default=1e-9, gt=0.0)
    power_max_iter: int = Field(default=10_000, ge=1)
    curvature_damping: float = Field(default=1e-8, gt=0.0)
    fixed_point_tol: float = Field(default=1e-10, gt=0.0)
    merge_factor: float = Field(default=10.0, gt=0.0)
    divergence_bound: float = Field(default=1e12, gt=0.0)
    fisher_damping: float = Field(default=1e-6, gt=0.0)

    @property
    def merge_radius(self) -> float:
        return self.merge_factor * self.fixed_point_tol


class FixedPointParams(StrictModel):
    dim: int = Field(default=2, ge=1)
    hidden: int = Field(default=16, ge=1)
    n_points: int = Field(default=20, ge=1)
    data_scale: float = Field(default=0.5, gt=0.0)
    train_steps: int = Field(default=2000, ge=1)
    lr: float = Field(default=0.05, gt=0.0)
    max_t: int = Field(default=10_000, ge=1)
    contraction_rhos: list[float] = Field(default_factory=lambda: [0.3, 0.6, 0.9])
    enumeration_gain: float = 3.0
    enumeration_grid: list[float] = Field(
        default_factory=lambda: [-2.0, -0.1, 0.0, 0.1, 2.0]
    )
    budget_fraction: float = Field(default=0.5, gt=0.0)
    lr_theta: float = Field(default=0.05, gt=0.0)
    lr_lambda: float = Field(default=0.05, gt=0.0)
    penalty: float = Field(default=0.0, ge=0.0)
    lagrangian_steps: int = Field(default=20_000, ge=1)
    step_tol: float = Field(default=1e-5, gt=0.0)
    perturbation_rho: float = Field(default=0.9, gt=0.0)
    perturbation_eps: float = Field(default=0.1, ge=0.0)


class CoversParams(StrictModel):
    layer_sizes: list[int] = Field(default_factory=lambda: [2, 8, 8, 1], min_length=2)
    n_samples: int = Field(default=100, ge=1)
    tau: float | None = None  # None: per-activation default
    hidden_activation: Activation = Activation.RELU
    steps: int = Field(default=200, ge=1)
    lr: float = Field(default=0.05, gt=0.0)
    snapshot_every: int = Field(default=50, ge=1)


class BoundaryParams(StrictModel):
    dim: int = Field(default=2, ge=1)
    hidden: int = Field(default=8, ge=1)
    classes: int = Field(default=2, ge=2)
    n_samples: int = Field(default=40, ge=1)
    stage0_steps: int = Field(default=300, ge=1)
    stage1_steps: int = Field(default=300, ge=1)
    stage2_steps: int = Field(default=300, ge=1)
    lr: float = Field(default=0.1, gt=0.0)
    lam: float = Field(default=1.0, ge=0.0)
    eps: float = Field(default=0.05, ge=0.0)
    alpha: float = Field(default=1 / 3, ge=0.0)
    beta: float = Field(default=1 / 3, ge=0.0)
    negatives: int = Field(default=4, ge=1)
    boundary_x0: float = Field(default=2.5, gt=0.0)


class StochasticParams(StrictModel):
    gain: float = Field(default=0.5, gt=0.0)
    sigma: float = Field(default=0.1, ge=0.0)
    depth: int = Field(default=50, ge=4)
    n_runs: int = Field(default=4000, ge=1)
    pilot_steps: int = Field(default=4000, ge=10)
    burn_in: int = Field(default=500, ge=0)
    n_draws: int = Field(default=10_000, ge=100)
    union_specs: int = Field(default=100, ge=1)
    union_samples: int = Field(default=1000, ge=1)
    trajectories: int = Field(default=50, ge=10)


class PlasticityParams(StrictModel):
    dim: int = Field(default=2, ge=1)
    hidden: int = Field(default=3, ge=1)
    n_samples: int = Field(default=200, ge=1)
    train_steps: int = Field(default=300, ge=1)
    lr: float = Field(default=0.05, gt=0.0)
    checkpoint_every: int = Field(default=100, ge=1)
    components: int = Field(default=2, ge=1)
    samples_per_component: int = Field(default=2000, ge=1)
    band_fraction: float = Field(default=0.1, gt=0.0, lt=1.0)
    level: float = Field(default=0.5, gt=0.0, lt=1.0)
    C0: float = Field(default=1.0, gt=0.0)


class DatagenParams(StrictModel):
    dim: int = Field(default=1, ge=1)
    n_samples: int = Field(default=200, ge=1)
    fd_step: float = Field(default=1e-3, gt=0.0)
    points_per_piece: int = Field(default=64, ge=1)
    batch_size: int = Field(default=32, ge=1)
    degree: int = Field(default=2, ge=2)
    depth: int = Field(default=3, ge=1)
    frequency: float = Field(default=3.0, gt=0.0)
    jump: float = 1.0


class FederationParams(StrictModel):
    clients: int = Field(default=3, ge=2)
    rounds: int = Field(default=50, ge=1)
    beta: float = Field(default=0.1, ge=0.0)
    lam: float = Field(default=0.5, ge=0.0)
    eta: float = Field(default=0.05, gt=0.0)
    max_step: float = Field(default=0.25, gt=0.0)
    init_jitter: float = Field(default=0.3, ge=0.0)
    local_steps: int = Field(default=1, ge=1)
    samples_per_client: int = Field(default=40, ge=1)
    dim: int = Field(default=2, ge=1)
    hidden: int = Field(default=8, ge=1)
    classes: int = Field(default=2, ge=2)
    shared_data: bool = True
    anchors: list[int] = Field(default_factory=lambda: [2])  # anchored companion run
    probe_size: int = Field(default=64, ge=1)

    @model_validator(mode="after")
    def _anchors_in_range(self) -> "FederationParams":
        bad = [a for a in self.anchors if not 0 <= a < self.clients]
        if bad:
            raise ValueError(f"anchor indices {bad} out of range")
        if len(set(self.anchors)) == self.clients:
            raise ValueError("at least one client must stay free")
        return self


class SuiteMember(StrictModel):
    subcommand: Subcommand
    config: str  # relative to the suite config's directory

    @model_validator(mode="after")
    def _no_nesting(self) -> "SuiteMember":
        if self.subcommand == Subcommand.SUITE:
            raise ValueError("suites cannot contain suites")
        return self


class SuiteParams(StrictModel):
    members: list[SuiteMember] = Field(default_factory=list)


class RunConfig(StrictModel):
    experiment: str = "default"
    seed: int = Field(default=0, ge=0, lt=2**64)
    output_dir: str | None = None
    tolerances: Tolerances = Field(default_factory=Tolerances)
    fixedpoint: FixedPointParams = Field(default_factory=FixedPointParams)
    covers: CoversParams = Field(default_factory=CoversParams)
    boundary: BoundaryParams = Field(default_factory=BoundaryParams)
    stochastic: StochasticParams = Field(default_factory=StochasticParams)
    plasticity: PlasticityParams = Field(default_factory=PlasticityParams)
    datagen: DatagenParams = Field(default_factory=DatagenParams)
    federation: FederationParams = Field(default_factory=FederationParams)
    suite: SuiteParams = Field(default_factory=SuiteParams)

    @classmethod
    def load_from_file(cls, filepath: Path) -> "RunConfig":
        """Load RunConfig from JSON file"""
        return cls.model_validate_json(filepath.read_text())
