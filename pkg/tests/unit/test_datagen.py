import numpy as np
import pytest
from pydantic import ValidationError

from src.datagen import (
    complexity_index,
    data_complexity_batch,
    data_complexity_full,
    dataset_table,
    generate,
    minibatch_indices,
    minibatch_sampler,
    nonlinear_complexity,
    tag_dataset,
)
from src.enums import DataAxis, FunctionClass
from src.errors import PreconditionError
from src.models import (
    AxisScorer,
    Box,
    CompositionParams,
    FunctionSpec,
    LinearParams,
    PiecewiseParams,
    PolynomialParams,
)


def spec_of(params, dim: int = 1, seed: int = 0) -> FunctionSpec:
    return FunctionSpec(params=params, dim=dim, seed=seed)


class TestGeneration:
    def test_linear_outputs_are_exact(self):
        dataset, _ = generate(spec_of(LinearParams(weights=[2.0], bias=1.0)), 20)
        assert np.array_equal(dataset.outputs, 2.0 * dataset.inputs[:, 0] + 1.0)
        assert np.all(np.abs(dataset.inputs) <= 1.0)

    def test_same_seed_same_dataset(self):
        spec = spec_of(CompositionParams(), dim=2, seed=4)
        a, _ = generate(spec, 50)
        b, _ = generate(spec, 50)
        assert np.array_equal(a.inputs, b.inputs)
        assert np.array_equal(a.outputs, b.outputs)

    def test_piece_ids_follow_the_breakpoints(self):
        params = PiecewiseParams(breakpoints=[0.0], jumps=[1.0])
        dataset, _ = generate(spec_of(params), 100)
        upper = (dataset.inputs[:, 0] >= 0).astype(int)
        assert np.array_equal(dataset.piece_ids, upper)
        assert np.array_equal(dataset.outputs, dataset.piece_ids.astype(float))

    def test_smooth_classes_have_one_piece(self):
        dataset, _ = generate(spec_of(PolynomialParams(degree=3)), 30)
        assert set(dataset.piece_ids.tolist()) == {0}

    def test_empty_dataset_rejected(self):
        with pytest.raises(PreconditionError):
            generate(spec_of(LinearParams()), 0)

    def test_linear_weights_need_one_entry_per_dimension(self):
        with pytest.raises(ValidationError):
            spec_of(LinearParams(weights=[1.0]), dim=2)

    def test_function_class_from_params(self):
        assert spec_of(PiecewiseParams()).function_class == FunctionClass.DISCONTINUOUS

    def test_table_layout(self):
        dataset, _ = generate(spec_of(LinearParams(), dim=2), 3)
        header, rows = dataset_table(dataset)
        assert header == ["x_0", "x_1", "y", "piece_id"]
        assert len(rows) == 3
        assert all(len(r) == 4 for r in rows)


class TestComplexityIndex:
    @pytest.mark.parametrize(
        "params, expected",
        [
            (LinearParams(), "0"),
            (PolynomialParams(degree=3), "3"),
            (CompositionParams(), "∞"),
            (PiecewiseParams(), "⊥"),
        ],
    )
    def test_index_per_class(self, params, expected):
        assert complexity_index(spec_of(params)) == expected


class TestNonlinearComplexity:
    def test_linear_function_has_no_curvature(self):
        _, fn = generate(spec_of(LinearParams(), dim=2, seed=1), 1)
        report = nonlinear_complexity(fn)
        assert report.boundary_terms == []
        assert report.c_nonlinear < 1e-6

    def test_square_has_constant_second_derivative(self):
        _, fn = generate(spec_of(PolynomialParams(degree=2)), 1)
        report = nonlinear_complexity(fn)
        assert report.curvature_terms == [pytest.approx(2.0, rel=1e-6)]

    def test_smooth_classes_grow_more_complex(self):
        linear = nonlinear_complexity(generate(spec_of(LinearParams()), 1)[1])
        poly = nonlinear_complexity(generate(spec_of(PolynomialParams()), 1)[1])
        composed = nonlinear_complexity(generate(spec_of(CompositionParams()), 1)[1])
        assert linear.c_nonlinear < poly.c_nonlinear
        assert linear.c_nonlinear < composed.c_nonlinear

    def test_jumps_are_read_back(self):
        params = PiecewiseParams(breakpoints=[-0.3, 0.4], jumps=[0.5, -2.0])
        _, fn = generate(spec_of(params), 1)

        report = nonlinear_complexity(fn)

        assert report.boundary_terms == pytest.approx([0.5, 2.0], abs=1e-9)
        assert report.curvature_terms == pytest.approx([0.0, 0.0, 0.0], abs=1e-9)

    def test_partition_must_cover_the_domain(self):
        _, fn = generate(spec_of(LinearParams()), 1)
        half = Box(low=[-1.0], high=[0.0])
        with pytest.raises(PreconditionError):
            nonlinear_complexity(fn, partition=[half])

    def test_fd_step_must_be_positive(self):
        _, fn = generate(spec_of(LinearParams()), 1)
        with pytest.raises(PreconditionError):
            nonlinear_complexity(fn, fd_step=0.0)


class TestDataComplexity:
    @pytest.fixture
    def tagged(self):
        dataset, fn = generate(spec_of(PolynomialParams(), dim=2, seed=3), 40)
        return dataset, fn, tag_dataset(dataset, fn)

    def test_every_axis_is_tagged(self, tagged):
        _, _, tags = tagged
        assert all(set(tag) == set(DataAxis) for tag in tags)
        assert tags[0][DataAxis.TIME] == 0.0
        assert tags[-1][DataAxis.TIME] == 1.0

    def test_full_complexity_is_the_sum_over_batches(self, tagged):
        dataset, fn, tags = tagged
        scorer = AxisScorer()
        full = data_complexity_full(dataset, fn, scorer)
        halves = data_complexity_batch(tags[:20], scorer) + data_complexity_batch(
            tags[20:], scorer
        )
        assert full == pytest.approx(halves, rel=1e-12)

    def test_offset_counts_once_per_sample(self, tagged):
        _, _, tags = tagged
        scorer = AxisScorer(weights={}, offset=0.5)
        assert data_complexity_batch(tags, scorer) == pytest.approx(20.0)

    def test_empty_batch_scores_zero(self):
        assert data_complexity_batch([], AxisScorer()) == 0.0

    def test_missing_axis_is_named(self):
        tags = [{DataAxis.SPACE: 1.0}]
        scorer = AxisScorer(weights={DataAxis.CURVATURE: 1.0})
        with pytest.raises(PreconditionError, match="axes: n"):
            data_complexity_batch(tags, scorer)


class TestMinibatches:
    def test_batches_partition_the_indices(self):
        batches = minibatch_indices(10, 3, seed=0)
        assert [len(b) for b in batches] == [3, 3, 3, 1]
        assert sorted(np.concatenate(batches).tolist()) == list(range(10))

    def test_epochs_shuffle_differently_but_reproducibly(self):
        first = np.concatenate(minibatch_indices(50, 10, seed=2, epoch=0))
        again = np.concatenate(minibatch_indices(50, 10, seed=2, epoch=0))
        second = np.concatenate(minibatch_indices(50, 10, seed=2, epoch=1))
        assert np.array_equal(first, again)
        assert not np.array_equal(first, second)

    def test_batch_size_validated(self):
        with pytest.raises(PreconditionError):
            minibatch_indices(5, 6, seed=0)

    def test_sampler_yields_every_epoch(self):
        dataset, _ = generate(spec_of(LinearParams()), 7)
        batches = list(minibatch_sampler(dataset, 3, seed=1, epochs=2))
        assert len(batches) == 6
        assert sum(len(b) for b in batches) == 14
