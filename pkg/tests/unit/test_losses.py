import numpy as np
import pytest

from src.enums import Activation
from src.errors import DimensionMismatchError, PreconditionError
from src.losses import (
    CrossEntropyLoss,
    ResidualLoss,
    ScaledLoss,
    SquaredErrorLoss,
    SumLoss,
)
from src.models import Batch, Layer, Network


class TestResidualLoss:
    def test_identity_map_has_zero_residual(self):
        net = Network.linear(np.eye(2))
        value, grad = ResidualLoss().value_and_grad(net, Batch.of(np.ones((3, 2))))
        assert value == 0.0
        assert np.array_equal(grad, np.zeros(net.n_params))

    def test_value_is_mean_squared_residual(self):
        net = Network.linear(2.0 * np.eye(2))
        X = np.array([[1.0, 0.0], [0.0, 3.0]])
        # residual is x itself: (1 + 9) / 2
        assert ResidualLoss().value(net, Batch.of(X)) == pytest.approx(5.0)

    def test_non_square_rejected(self):
        net = Network.linear(np.ones((3, 2)))
        with pytest.raises(DimensionMismatchError):
            ResidualLoss().value(net, Batch.of(np.ones((1, 2))))


class TestSquaredErrorLoss:
    def test_missing_targets_rejected(self):
        with pytest.raises(PreconditionError):
            SquaredErrorLoss().value(
                Network.linear(np.eye(2)), Batch.of(np.ones((1, 2)))
            )

    def test_target_width_checked(self):
        batch = Batch.of(np.ones((2, 2)), targets=np.ones((2, 3)))
        with pytest.raises(DimensionMismatchError):
            SquaredErrorLoss().value(Network.linear(np.eye(2)), batch)


class TestCrossEntropyLoss:
    def test_uniform_head_gives_log_classes(self):
        layer = Layer(
            weight=np.zeros((4, 2)), bias=np.zeros(4), activation=Activation.SOFTMAX
        )
        net = Network(layers=[layer])
        batch = Batch.of(np.ones((3, 2)), labels=np.array([0, 1, 3]))
        assert CrossEntropyLoss().value(net, batch) == pytest.approx(np.log(4.0))

    def test_needs_softmax_head(self):
        batch = Batch.of(np.ones((1, 2)), labels=np.array([0]))
        with pytest.raises(PreconditionError):
            CrossEntropyLoss().value(Network.linear(np.eye(2)), batch)

    def test_out_of_range_label_rejected(self):
        rng = np.random.default_rng(0)
        net = Network.initialize([2, 2], [Activation.SOFTMAX], rng)
        with pytest.raises(PreconditionError):
            CrossEntropyLoss().value(
                net, Batch.of(np.ones((1, 2)), labels=np.array([2]))
            )


class TestCombinators:
    def test_scaled_and_summed_losses_combine_linearly(self):
        rng = np.random.default_rng(1)
        net = Network.initialize([2, 3, 2], [Activation.TANH, Activation.IDENTITY], rng)
        batch = Batch.of(
            rng.standard_normal((5, 2)), targets=rng.standard_normal((5, 2))
        )
        base_value, base_grad = SquaredErrorLoss().value_and_grad(net, batch)

        combined = SumLoss(
            terms=[SquaredErrorLoss(), ScaledLoss(base=SquaredErrorLoss(), factor=2.0)]
        )
        value, grad = combined.value_and_grad(net, batch)

        assert value == pytest.approx(3.0 * base_value)
        assert np.allclose(grad, 3.0 * base_grad)
