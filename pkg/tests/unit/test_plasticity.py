import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.enums import Activation
from src.errors import (
    DimensionMismatchError,
    InsufficientDataError,
    PreconditionError,
    SamplerError,
)
from src.models import Checkpoint, GaussianComponent, Network
from src.plasticity import (
    curvature_functional,
    effective_capacity,
    fit_components,
    gaussian_gradient,
    gaussian_hessian,
    gaussian_value,
    hessian_fd_check,
    level_set_sample,
    rigidity_track,
)


def unit_component(dim: int = 1, scale: float = 1.0, level: float = 0.5):
    return GaussianComponent(
        mu=np.zeros(dim), sigma=scale**2 * np.eye(dim), level=level
    )


@pytest.fixture
def skewed() -> GaussianComponent:
    return GaussianComponent(
        mu=[0.5, -0.2], sigma=[[1.0, 0.3], [0.3, 0.5]], level=0.4
    )


class TestGaussianField:
    def test_peak_at_the_mean(self, skewed):
        assert gaussian_value(skewed, [0.5, -0.2]) == 1.0
        assert np.allclose(gaussian_gradient(skewed, [0.5, -0.2]), 0.0)

    def test_batch_evaluation(self):
        values = gaussian_value(unit_component(), np.array([[0.0], [1.0]]))
        assert values == pytest.approx([1.0, math.exp(-0.5)])

    def test_hessian_at_the_mean_is_minus_precision(self, skewed):
        H = gaussian_hessian(skewed, [0.5, -0.2])
        assert np.allclose(H, -np.linalg.inv(skewed.sigma))

    def test_hessian_agrees_with_finite_differences(self, skewed):
        points = [[0.0, 0.0], [1.2, 0.4], [-0.7, -1.1]]
        assert hessian_fd_check(skewed, points) < 1e-5

    def test_point_width_checked(self, skewed):
        with pytest.raises(DimensionMismatchError):
            gaussian_value(skewed, [0.0, 0.0, 0.0])

    def test_covariance_must_be_positive_definite(self):
        with pytest.raises(ValidationError):
            GaussianComponent(mu=[0.0, 0.0], sigma=[[1.0, 2.0], [2.0, 1.0]], level=0.5)

    def test_level_inside_unit_interval(self):
        with pytest.raises(ValidationError):
            GaussianComponent(mu=[0.0], sigma=[[1.0]], level=1.0)


class TestLevelSetSample:
    def test_accepted_points_sit_in_the_band(self, skewed):
        sample = level_set_sample(skewed, 500, 0.05, seed=3)
        values = gaussian_value(skewed, sample.points)

        assert sample.accepted == 500
        assert sample.shortfall == 0
        assert np.all(np.abs(values - 0.4) < 0.05)

    def test_same_seed_same_points(self, skewed):
        a = level_set_sample(skewed, 100, 0.05, seed=[1, 2])
        b = level_set_sample(skewed, 100, 0.05, seed=[1, 2])
        assert np.array_equal(a.points, b.points)

    def test_draw_budget_leaves_a_shortfall(self):
        sample = level_set_sample(unit_component(), 1000, 0.05, seed=0, max_draws=10)
        assert sample.draws == 10
        assert sample.shortfall > 0

    def test_band_reaching_zero_rejected(self):
        with pytest.raises(PreconditionError):
            level_set_sample(unit_component(level=0.3), 10, 0.3, seed=0)

    def test_non_positive_band_rejected(self):
        with pytest.raises(PreconditionError):
            level_set_sample(unit_component(), 10, 0.0, seed=0)

    def test_hopeless_band_raises_instead_of_spinning(self):
        with pytest.raises(SamplerError):
            level_set_sample(unit_component(), 10, 1e-9, seed=0)


class TestCurvatureAndCapacity:
    def test_narrow_band_matches_the_level_set_hessian(self):
        # on phi = c in one dimension, Hess phi = c (x^2 - 1) with x^2 = -2 ln c
        c = 0.5
        expected = (c * (-2.0 * math.log(c) - 1.0)) ** 2
        R = curvature_functional([unit_component()], 4000, seed=1, band_fraction=0.01)
        assert R == pytest.approx(expected, rel=0.05)

    def test_tighter_covariance_increases_curvature(self):
        wide = curvature_functional([unit_component(2, 1.0)], 1000, seed=2)
        tight = curvature_functional([unit_component(2, 0.5)], 1000, seed=2)
        assert tight > wide

    def test_components_add(self):
        one = curvature_functional([unit_component()], 500, seed=4)
        two = curvature_functional([unit_component(), unit_component()], 500, seed=4)
        assert two > one

    def test_capacity_formula(self):
        assert effective_capacity(2.0, 1.0) == 1.0
        assert effective_capacity(3.0, 0.0) == 3.0

    @pytest.mark.parametrize("C0, R", [(0.0, 1.0), (1.0, -0.1), (1.0, math.inf)])
    def test_capacity_inputs_validated(self, C0, R):
        with pytest.raises(PreconditionError):
            effective_capacity(C0, R)

    def test_empty_component_list_rejected(self):
        with pytest.raises(PreconditionError):
            curvature_functional([], 10, seed=0)


class TestComponentFitting:
    def test_separated_clusters_recover_their_means(self):
        rng = np.random.default_rng(0)
        cloud = np.vstack(
            [
                rng.normal([-5.0, 0.0], 0.3, size=(100, 2)),
                rng.normal([5.0, 1.0], 0.3, size=(100, 2)),
            ]
        )
        components = fit_components(cloud, 2, seed=1)
        means = sorted(c.mu.tolist() for c in components)

        assert len(components) == 2
        assert means[0] == pytest.approx([-5.0, 0.0], abs=0.15)
        assert means[1] == pytest.approx([5.0, 1.0], abs=0.15)
        assert all(c.level == 0.5 for c in components)

    def test_collapsed_cloud_still_yields_a_proper_gaussian(self):
        components = fit_components(np.ones((10, 2)), 1, seed=0)
        assert np.all(np.linalg.eigvalsh(components[0].sigma) > 0)

    def test_too_few_samples_rejected(self):
        with pytest.raises(InsufficientDataError):
            fit_components(np.zeros((5, 3)), 2, seed=0)


class TestRigidityTrack:
    @pytest.fixture
    def inputs(self) -> np.ndarray:
        return np.random.default_rng(5).standard_normal((60, 2))

    def test_needs_two_checkpoints(self, inputs):
        net = Network.initialize(
            [2, 3, 1], [Activation.TANH, Activation.IDENTITY], np.random.default_rng(0)
        )
        with pytest.raises(PreconditionError):
            rigidity_track([Checkpoint(step=0, network=net)], inputs, 2, seed=0)

    def test_curve_follows_the_capacity_formula(self, inputs):
        rng = np.random.default_rng(0)
        sizes, acts = [2, 3, 1], [Activation.TANH, Activation.IDENTITY]
        checkpoints = [
            Checkpoint(step=0, network=Network.initialize(sizes, acts, rng)),
            Checkpoint(step=10, network=Network.initialize(sizes, acts, rng)),
        ]

        curve = rigidity_track(
            checkpoints, inputs, 2, seed=3, C0=2.0, samples_per_component=200
        )

        assert [p.step for p in curve.points] == [0, 10]
        for p in curve.points:
            assert p.C_eff == 2.0 / (1.0 + p.R)
            assert p.C_eff <= 2.0
