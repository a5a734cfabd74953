import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.covers import (
    active_covers,
    activation_pattern,
    count_pieces,
    cover_drift,
    cover_map,
    coverage_fraction,
    jaccard_distance,
    track_covers,
)
from src.enums import Activation
from src.errors import PreconditionError
from src.losses import SquaredErrorLoss
from src.models import Batch, Layer, Network


def relu_net() -> Network:
    """x -> relu(x), relu(-x) then their sum."""
    return Network(
        layers=[
            Layer(weight=[[1.0], [-1.0]], bias=[0.0, 0.0], activation=Activation.RELU),
            Layer(weight=[[1.0, 1.0]], bias=[0.0], activation=Activation.IDENTITY),
        ]
    )


class TestCoverMap:
    def test_covers_split_the_line_at_zero(self):
        X = np.array([[-2.0], [-1.0], [0.0], [1.0], [2.0]])
        cm = cover_map(relu_net(), X, tau=0.0)

        assert cm.cover(0, 0) == frozenset({3, 4})
        assert cm.cover(0, 1) == frozenset({0, 1})
        # |x| > 0 everywhere but the origin
        assert cm.cover(1, 0) == frozenset({0, 1, 3, 4})

    def test_coverage_fraction(self):
        X = np.array([[-1.0], [0.0], [1.0]])
        cm = cover_map(relu_net(), X, tau=0.0)
        assert coverage_fraction(cm, 0) == pytest.approx(2 / 3)

    def test_coverage_layer_out_of_range(self):
        cm = cover_map(relu_net(), np.array([[1.0]]), tau=0.0)
        with pytest.raises(PreconditionError):
            coverage_fraction(cm, 2)

    def test_active_covers_of_one_sample(self):
        assert active_covers(relu_net(), np.array([1.5]), 0.0) == {(0, 0), (1, 0)}

    def test_empty_dataset_rejected(self):
        with pytest.raises(PreconditionError):
            cover_map(relu_net(), np.empty((0, 1)), tau=0.0)


def tanh_node() -> Network:
    return Network(
        layers=[Layer(weight=[[2.0]], bias=[0.0], activation=Activation.TANH)]
    )


class TestThresholds:
    def test_tanh_nodes_are_covered_by_magnitude(self):
        X = np.array([[-2.0], [-0.1], [0.1], [2.0]])
        cm = cover_map(tanh_node(), X)
        assert cm.tau is None
        assert cm.cover(0, 0) == frozenset({0, 3})

    def test_explicit_tau_keeps_the_magnitude_rule(self):
        X = np.array([[-2.0], [-0.3], [0.3], [2.0]])
        assert cover_map(tanh_node(), X, tau=0.9).cover(0, 0) == frozenset({0, 3})
        assert cover_map(tanh_node(), X, tau=0.1).cover(0, 0) == frozenset(
            {0, 1, 2, 3}
        )

    def test_relu_default_is_strictly_active(self):
        X = np.array([[-1.0], [0.0], [1.0]])
        assert cover_map(relu_net(), X).entries == cover_map(
            relu_net(), X, tau=0.0
        ).entries

    def test_active_covers_agree_with_cover_map(self):
        X = np.array([[-2.0], [-0.1], [0.1], [2.0]])
        cm = cover_map(tanh_node(), X)
        for i, x in enumerate(X):
            assert ((0, 0) in active_covers(tanh_node(), x)) == (i in cm.cover(0, 0))


class TestJaccard:
    def test_identical_sets(self):
        assert jaccard_distance(frozenset({1, 2}), frozenset({1, 2})) == 0.0

    def test_disjoint_sets(self):
        assert jaccard_distance(frozenset({1}), frozenset({2})) == 1.0

    def test_two_empty_sets_have_zero_distance(self):
        assert jaccard_distance(frozenset(), frozenset()) == 0.0

    @given(
        st.frozensets(st.integers(0, 20)),
        st.frozensets(st.integers(0, 20)),
    )
    def test_symmetric_and_bounded(self, a, b):
        d = jaccard_distance(a, b)
        assert d == jaccard_distance(b, a)
        assert 0.0 <= d <= 1.0


class TestDrift:
    def test_unchanged_network_has_no_drift(self):
        X = np.linspace(-1, 1, 7)[:, None]
        cm = cover_map(relu_net(), X, tau=0.0)
        drift = cover_drift(cm, cm)
        assert drift.mean_drift == [0.0, 0.0]

    def test_maps_over_different_data_are_incomparable(self):
        a = cover_map(relu_net(), np.array([[1.0]]), tau=0.0)
        b = cover_map(relu_net(), np.array([[2.0]]), tau=0.0)
        with pytest.raises(PreconditionError):
            cover_drift(a, b)

    def test_flipped_first_layer_swaps_the_covers(self):
        X = np.array([[-1.0], [1.0]])
        flipped = Network(
            layers=[
                Layer(
                    weight=[[-1.0], [1.0]], bias=[0.0, 0.0], activation=Activation.RELU
                ),
                relu_net().layers[1],
            ]
        )
        drift = cover_drift(cover_map(relu_net(), X, 0.0), cover_map(flipped, X, 0.0))
        assert drift.distances[0] == [1.0, 1.0]
        assert drift.distances[1] == [0.0]


class TestPieces:
    def test_relu_pieces_on_both_sides_of_zero(self):
        X = np.array([[-1.0], [-0.5], [0.5], [1.0]])
        assert count_pieces(relu_net(), X, 0) == 2
        assert activation_pattern(relu_net(), np.array([0.5]), 0) == (True, False)


class TestTracking:
    def test_snapshot_schedule_includes_the_last_step(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(-1, 1, size=(30, 2))
        batch = Batch.of(X, targets=np.sin(X.sum(axis=1)))
        net = Network.initialize(
            [2, 6, 1], [Activation.RELU, Activation.IDENTITY], rng
        )

        _, snapshots, rows = track_covers(
            net, SquaredErrorLoss(), batch, steps=25, lr=0.05, tau=0.0, every=10
        )

        assert [s.iteration for s in snapshots] == [0, 10, 20, 25]
        assert len(rows) == 4 * (6 + 1)
        assert all(r.jaccard_vs_prev is None for r in rows if r.iteration == 0)
        assert all(
            0.0 <= r.jaccard_vs_prev <= 1.0 for r in rows if r.iteration > 0
        )
