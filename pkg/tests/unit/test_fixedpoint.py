import math

import numpy as np
import pytest

from src.enums import Activation
from src.errors import DimensionMismatchError, PreconditionError
from src.fixedpoint import (
    affine_fixed_point,
    contraction_report,
    enumerate_fixed_points,
    error_ratios,
    iterate,
    lagrangian_gradient,
    lagrangian_train,
    mean_residual_norm,
    newton_step,
    perturbation_accel,
    preconditioned_step,
    residual,
    train_residual,
)
from src.models import Layer, Network, NoiseSpec
from src.nncore import curvature_proxy
from src.runner.experiments import bisect_tanh_root


def scalar_tanh(gain: float) -> Network:
    return Network(
        layers=[Layer(weight=[[gain]], bias=[0.0], activation=Activation.TANH)]
    )


class TestResidual:
    def test_residual_of_linear_map(self):
        net = Network.linear(0.5 * np.eye(2), np.array([1.0, 0.0]))
        e, norm = residual(net, np.array([2.0, 2.0]))
        assert np.allclose(e, [0.0, -1.0])
        assert norm == pytest.approx(1.0)

    def test_non_square_network_rejected(self):
        with pytest.raises(DimensionMismatchError):
            residual(Network.linear(np.ones((1, 2))), np.zeros(2))

    def test_training_lowers_the_residual(self):
        rng = np.random.default_rng(0)
        data = 0.5 * rng.standard_normal((20, 2))
        net = Network.initialize(
            [2, 16, 2], [Activation.TANH, Activation.IDENTITY], rng
        )

        result = train_residual(net, data, 300, 0.05)

        assert len(result.loss_curve) == 301
        assert result.loss_curve[-1] < result.loss_curve[0]
        assert mean_residual_norm(result.network, data) < mean_residual_norm(net, data)


class TestIterate:
    def test_contraction_converges_to_closed_form(self):
        net = Network.linear(np.diag([0.5, 0.25]), np.array([1.0, 1.0]))
        result = iterate(net, np.zeros(2), 1000, 1e-12)

        assert result.converged and not result.diverged
        assert np.allclose(result.report.point, affine_fixed_point(net), atol=1e-11)
        assert result.report.stable

    def test_expansion_diverges_as_a_verdict(self):
        result = iterate(Network.linear([[2.0]]), np.array([1.0]), 100)
        assert result.diverged
        assert not result.converged
        assert result.report is None

    def test_budget_exhaustion_is_neither_verdict(self):
        result = iterate(Network.linear([[0.999]]), np.array([1.0]), 5)
        assert not result.converged and not result.diverged
        assert result.steps == 5
        assert len(result.path) == 6

    def test_error_ratios_track_the_contraction_rate(self):
        net = Network.linear([[0.6]], [1.0])
        result = iterate(net, np.array([0.0]), 1000, 1e-12)
        ratios = error_ratios(result.path, affine_fixed_point(net))
        assert all(abs(r - 0.6) < 1e-3 for r in ratios[:10])

    def test_noise_needs_an_rng(self):
        with pytest.raises(PreconditionError):
            iterate(
                Network.linear([[0.5]]), np.zeros(1), 10, noise=NoiseSpec(sigma=0.1)
            )

    def test_noise_is_reproducible_under_one_seed(self):
        net = Network.linear([[0.5]])
        noise = NoiseSpec(sigma=0.1)
        a = iterate(net, np.zeros(1), 50, noise=noise, rng=np.random.default_rng(3))
        b = iterate(net, np.zeros(1), 50, noise=noise, rng=np.random.default_rng(3))
        assert all(np.array_equal(x, y) for x, y in zip(a.path, b.path))

    def test_constant_shift_moves_the_fixed_point(self):
        net = Network.linear([[0.5]])
        result = iterate(net, np.zeros(1), 1000, 1e-12, noise=NoiseSpec(shift=[1.0]))
        assert result.report.point[0] == pytest.approx(2.0, abs=1e-10)


class TestEnumeration:
    def test_three_fixed_points_of_steep_tanh(self):
        a = bisect_tanh_root(3.0)
        enumeration = enumerate_fixed_points(
            scalar_tanh(3.0), [[-2.0], [-0.1], [0.0], [0.1], [2.0]], 1e-10, 10_000
        )

        points = [float(r.point[0]) for r in enumeration.fixed_points]
        stable = [r.stable for r in enumeration.fixed_points]

        assert a == pytest.approx(0.99489, abs=1e-4)
        assert points == pytest.approx([-a, 0.0, a], abs=1e-6)
        assert stable == [True, False, True]

    def test_shallow_tanh_has_only_the_origin(self):
        enumeration = enumerate_fixed_points(
            scalar_tanh(0.5), [[-1.0], [0.5], [1.0]], 1e-10, 10_000
        )
        assert len(enumeration.fixed_points) == 1
        assert enumeration.fixed_points[0].point[0] == pytest.approx(0.0, abs=1e-9)
        assert len(enumeration.fixed_points[0].basin_seeds) == 3

    def test_grid_order_does_not_matter(self):
        grid = [[-2.0], [0.3], [0.0], [1.5], [-0.4]]
        forward = enumerate_fixed_points(scalar_tanh(2.0), grid)
        backward = enumerate_fixed_points(scalar_tanh(2.0), list(reversed(grid)))
        assert [r.point.tolist() for r in forward.fixed_points] == [
            r.point.tolist() for r in backward.fixed_points
        ]

    def test_divergent_starts_are_listed(self):
        enumeration = enumerate_fixed_points(
            Network.linear([[2.0]]), [[0.0], [1.0]], divergence_bound=1e6
        )
        assert len(enumeration.fixed_points) == 1
        assert [s.tolist() for s in enumeration.divergent_seeds] == [[1.0]]


class TestContraction:
    def test_linear_radius_and_layer_norms(self):
        net = Network.linear(np.diag([0.8, -0.3]), np.array([0.2, 0.1]))
        report = contraction_report(net, affine_fixed_point(net))

        assert report.radius == pytest.approx(0.8, abs=1e-9)
        assert report.stable
        assert report.layer_norms == pytest.approx([0.8])

    def test_non_fixed_point_rejected(self):
        with pytest.raises(PreconditionError):
            contraction_report(Network.linear([[0.5]]), np.array([1.0]))

    def test_merge_factor_widens_the_residual_gate(self):
        report = contraction_report(
            Network.linear([[0.5]]), np.array([1.0]), tol=1e-3, merge_factor=1000.0
        )
        assert report.residual_norm == pytest.approx(0.5)
        assert report.radius == pytest.approx(0.5)

    def test_structured_perturbation_accelerates(self):
        rho, eps = 0.9, 0.1
        report = perturbation_accel(
            Network.linear(rho * np.eye(2)),
            Network.linear(-rho * np.eye(2)),
            eps,
            np.zeros(2),
        )
        assert report.rho_perturbed == pytest.approx(rho * (1 - eps), abs=1e-9)
        assert report.accelerated

    def test_zero_eps_changes_nothing(self):
        report = perturbation_accel(
            Network.linear([[0.7]]), Network.linear([[5.0]]), 0.0, np.zeros(1)
        )
        assert report.rho_perturbed == report.rho_base
        assert not report.accelerated


class TestPreconditioning:
    def test_curvature_matched_preconditioner_equalises_rates(self):
        H = np.diag([1.0, 100.0])
        theta = np.array([1.0, 1.0])

        step = preconditioned_step(theta, H @ theta, np.diag(H), 0.9, H)

        assert step.effective_radius == pytest.approx(0.1, abs=1e-12)
        assert np.allclose(step.theta, 0.1 * theta)

    def test_squared_gradient_moments_slow_the_stiff_direction(self):
        H = np.diag([1.0, 100.0])
        grad = H @ np.ones(2)
        G = curvature_proxy([grad] * 10, 0.9, 1e-8)

        step = preconditioned_step(np.ones(2), grad, G, 0.9, H)

        assert step.effective_radius == pytest.approx(1.0 - 0.9 / 100.0, abs=1e-9)

    def test_identity_preconditioner_is_plain_descent(self):
        step = preconditioned_step(np.ones(2), np.array([0.5, -1.0]), np.ones(2), 0.1)
        assert np.array_equal(step.theta, np.ones(2) - 0.1 * np.array([0.5, -1.0]))

    def test_non_positive_preconditioner_rejected(self):
        with pytest.raises(PreconditionError):
            preconditioned_step(np.ones(2), np.ones(2), np.array([1.0, 0.0]), 0.1)

    def test_newton_step_solves_a_quadratic(self):
        H = np.array([[2.0, 0.5], [0.5, 1.0]])
        theta = np.array([1.0, -1.0])
        assert np.allclose(newton_step(theta, H @ theta, H), 0.0)


class TestLagrangian:
    @pytest.fixture
    def start(self) -> Network:
        return Network.linear([[1.2, 0.3], [-0.4, 0.9]], [0.2, -0.1])

    @pytest.fixture
    def data(self) -> np.ndarray:
        return np.random.default_rng(1).standard_normal((10, 2))

    def test_constraint_value_is_norm_minus_budget(self, start, data):
        theta = start.parameters()
        _, g = lagrangian_gradient(start, data, 0.0, 1.0)
        assert g == pytest.approx(float(theta @ theta) - 1.0)

    def test_frozen_multiplier_reproduces_residual_training(self, start, data):
        lag = lagrangian_train(
            start, data, 1.275, 50, 0.05, 0.05, freeze_multiplier=True
        )
        plain = train_residual(start, data, 50, 0.05)

        assert lag.network.digest() == plain.network.digest()
        assert [s.multiplier for s in lag.history] == [0.0] * 51

    def test_history_starts_at_the_initial_state(self, start, data):
        lag = lagrangian_train(start, data, 1.275, 10, 0.05, 0.05)
        first = lag.history[0]
        theta = start.parameters()
        assert first.step == 0
        assert first.multiplier == 0.0
        assert math.isclose(first.constraint_value, float(theta @ theta) - 1.275)

    def test_budget_must_be_positive(self, start, data):
        with pytest.raises(PreconditionError):
            lagrangian_train(start, data, 0.0, 10, 0.05, 0.05)
