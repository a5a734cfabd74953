from .arrays import FloatArray, IntArray
from .batch import Batch, ContrastiveBatch
from .boundary import (
    BoundaryWeights,
    CallableReward,
    ConstantReward,
    IntentionCost,
    NegativeSquaredDistance,
    Reward,
    Stage2Result,
    WeakBoundaryPoint,
    WeakBoundarySet,
)
from .cover import CoverDriftReport, CoverMap, CoverRow
from .datagen import (
    AxisScorer,
    Box,
    ComplexityReport,
    CompositionParams,
    Dataset,
    FunctionSpec,
    LinearParams,
    PiecewiseParams,
    PolynomialParams,
)
from .federation import (
    ClientMetrics,
    FederationHyper,
    FederationState,
    FixedPointCheck,
    RoundMetrics,
)
from .fixed_point import (
    ContractionReport,
    FixedPointEnumeration,
    FixedPointReport,
    IterationResult,
    LagrangianResult,
    LagrangianState,
    NoiseSpec,
    PerturbationReport,
    PreconditionedStep,
    TrainingResult,
)
from .manifest import CheckResult, RunManifest, SuiteMemberResult, SuiteSummary
from .network import Layer, Network
from .plasticity import (
    Checkpoint,
    GaussianComponent,
    LevelSetSample,
    RigidityCurve,
    RigidityPoint,
)
from .run_config import (
    BoundaryParams,
    CoversParams,
    DatagenParams,
    FederationParams,
    FixedPointParams,
    PlasticityParams,
    RunConfig,
    StochasticParams,
    SuiteMember,
    SuiteParams,
    Tolerances,
)
from .stochastic import (
    ActivationStats,
    ContractionFit,
    DeviationEvent,
    DeviationSpec,
    ExpVsUnionReport,
    ExpVsUnionRow,
    InputSampler,
    StochasticFixedPointSummary,
    UnionBoundResult,
)
from .trajectory import Trajectory

__all__ = [
    "ActivationStats",
    "AxisScorer",
    "Batch",
    "BoundaryParams",
    "BoundaryWeights",
    "Box",
    "CallableReward",
    "CheckResult",
    "Checkpoint",
    "ClientMetrics",
    "ComplexityReport",
    "CompositionParams",
    "ConstantReward",
    "ContractionFit",
    "ContractionReport",
    "ContrastiveBatch",
    "CoverDriftReport",
    "CoverMap",
    "CoverRow",
    "CoversParams",
    "Dataset",
    "DatagenParams",
    "DeviationEvent",
    "DeviationSpec",
    "ExpVsUnionReport",
    "ExpVsUnionRow",
    "FederationHyper",
    "FederationParams",
    "FederationState",
    "FixedPointCheck",
    "FixedPointEnumeration",
    "FixedPointParams",
    "FixedPointReport",
    "FloatArray",
    "FunctionSpec",
    "GaussianComponent",
    "InputSampler",
    "IntArray",
    "IntentionCost",
    "IterationResult",
    "LagrangianResult",
    "LagrangianState",
    "Layer",
    "LevelSetSample",
    "LinearParams",
    "NegativeSquaredDistance",
    "Network",
    "NoiseSpec",
    "PerturbationReport",
    "PiecewiseParams",
    "PlasticityParams",
    "PolynomialParams",
    "PreconditionedStep",
    "Reward",
    "RigidityCurve",
    "RigidityPoint",
    "RoundMetrics",
    "RunConfig",
    "RunManifest",
    "Stage2Result",
    "StochasticFixedPointSummary",
    "StochasticParams",
    "SuiteMember",
    "SuiteMemberResult",
    "SuiteParams",
    "SuiteSummary",
    "Tolerances",
    "Trajectory",
    "TrainingResult",
    "UnionBoundResult",
    "WeakBoundaryPoint",
    "WeakBoundarySet",
]
