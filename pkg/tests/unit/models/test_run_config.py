import pytest
from pydantic import ValidationError

from src.enums import Subcommand
from src.models import (
    BoundaryWeights,
    FederationHyper,
    RunConfig,
    SuiteMember,
    Tolerances,
)


class TestRunConfig:
    """Test suite for the RunConfig schema."""

    def test_defaults_are_complete(self):
        config = RunConfig()
        assert config.seed == 0
        assert config.output_dir is None
        assert config.suite.members == []

    def test_unknown_top_level_key_rejected(self):
        with pytest.raises(ValidationError):
            RunConfig.model_validate({"seeed": 1})

    def test_unknown_block_key_rejected(self):
        with pytest.raises(ValidationError):
            RunConfig.model_validate({"federation": {"lambda": 0.5}})

    def test_seed_must_fit_in_64_bits(self):
        with pytest.raises(ValidationError):
            RunConfig(seed=2**64)

    def test_merge_radius_scales_the_tolerance(self):
        tol = Tolerances(fixed_point_tol=1e-8, merge_factor=5.0)
        assert tol.merge_radius == pytest.approx(5e-8)

    def test_resolved_dump_round_trips(self):
        config = RunConfig.model_validate({"seed": 4, "datagen": {"jump": 2.0}})
        again = RunConfig.model_validate(config.model_dump(mode="json"))
        assert again == config


class TestSuiteMember:
    def test_member_names_a_subcommand(self):
        member = SuiteMember(subcommand="covers", config="covers.json")
        assert member.subcommand == Subcommand.COVERS

    def test_suites_do_not_nest(self):
        with pytest.raises(ValidationError):
            SuiteMember(subcommand="suite", config="suite.json")


class TestSmallModels:
    def test_boundary_weights_leave_the_rest_to_supervision(self):
        assert BoundaryWeights(alpha=0.25, beta=0.5).supervised == pytest.approx(0.25)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError):
            BoundaryWeights(alpha=-0.1, beta=0.0)

    def test_federation_hyper_preconditioner_choices(self):
        assert FederationHyper(preconditioner="identity").preconditioner == "identity"
        with pytest.raises(ValidationError):
            FederationHyper(preconditioner="adam")
