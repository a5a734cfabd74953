"""Synthetic datasets in four complexity classes and their complexity metrics."""

import logging
import math
from collections.abc import Callable, Iterator, Mapping, Sequence

import numpy as np

from src.enums import DataAxis, FunctionClass
from src.errors import DimensionMismatchError, PreconditionError
from src.models import (
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

logger = logging.getLogger(__name__)

DOMAIN_LOW = -1.0
DOMAIN_HIGH = 1.0
JUMP_OFFSET = 1e-7
FD_CANCELLATION_FLOOR = 1e-7
DEFAULT_FD_STEP = 1e-3


class TargetFunction:
    """Vectorised ground-truth ``f`` built from a ``FunctionSpec``.

    Called on ``[n x dim]`` inputs (or one vector) it returns ``[n]`` outputs;
    ``piece_ids`` names the smooth piece each input falls in.
    """

    def __init__(
        self,
        spec: FunctionSpec,
        fn: Callable[[np.ndarray], np.ndarray],
        breakpoints: Sequence[float] = (),
    ):
        self.spec = spec
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        self._fn = fn

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def function_class(self) -> FunctionClass:
        return self.spec.function_class

    def _matrix(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :] if X.shape[0] == self.dim else X[:, None]
        if X.shape[1] != self.dim:
            raise DimensionMismatchError(f"expected width {self.dim}, got {X.shape[1]}")
        return X

    def __call__(self, X) -> np.ndarray:
        return self._fn(self._matrix(X))

    def piece_ids(self, X) -> np.ndarray:
        X = self._matrix(X)
        if self.breakpoints.size == 0:
            return np.zeros(X.shape[0], dtype=np.int64)
        return np.searchsorted(self.breakpoints, X[:, 0], side="right").astype(np.int64)


def build_function(spec: FunctionSpec) -> TargetFunction:
    params = spec.params
    rng = np.random.default_rng([spec.seed, 0])

    match params:
        case LinearParams():
            w = (
                np.asarray(params.weights, dtype=float)
                if params.weights is not None
                else rng.uniform(-1.0, 1.0, spec.dim)
            )
            bias = params.bias
            return TargetFunction(spec, lambda X: X @ w + bias)

        case PolynomialParams():
            coeffs = (
                np.asarray(params.coefficients, dtype=float)
                if params.coefficients is not None
                else np.eye(params.degree + 1)[-1]
            )
            return TargetFunction(
                spec, lambda X: np.polynomial.polynomial.polyval(X, coeffs).sum(axis=1)
            )

        case CompositionParams():
            omega, depth = params.frequency, params.depth

            def composed(X: np.ndarray) -> np.ndarray:
                s = X.mean(axis=1)
                for level in range(depth):
                    s = np.sin(omega * s) if level % 2 == 0 else np.tanh(omega * s)
                return s

            return TargetFunction(spec, composed)

        case PiecewiseParams():
            offsets = np.concatenate([[0.0], np.cumsum(params.jumps)])
            breaks = np.asarray(params.breakpoints, dtype=float)
            slope = params.slope

            def piecewise(X: np.ndarray) -> np.ndarray:
                piece = np.searchsorted(breaks, X[:, 0], side="right")
                return slope * X[:, 0] + offsets[piece]

            return TargetFunction(spec, piecewise, params.breakpoints)

    raise PreconditionError(f"unsupported function parameters {type(params).__name__}")


def generate(spec: FunctionSpec, n: int) -> tuple[Dataset, TargetFunction]:
    """``n`` inputs uniform on ``[-1, 1]^dim`` and their exact outputs."""
    if n < 1:
        raise PreconditionError(f"need at least one sample, got {n}")
    fn = build_function(spec)
    X = np.random.default_rng([spec.seed, 1]).uniform(
        DOMAIN_LOW, DOMAIN_HIGH, size=(n, spec.dim)
    )
    return Dataset(inputs=X, outputs=fn(X), piece_ids=fn.piece_ids(X)), fn


def complexity_index(spec: FunctionSpec) -> str:
    """``k(f)``: ``0`` linear, the degree for polynomials, ``∞`` for compositions
    and ``⊥`` (undefined) for discontinuous functions."""
    match spec.params:
        case LinearParams():
            return "0"
        case PolynomialParams(degree=k):
            return str(k)
        case CompositionParams():
            return "∞"
    return "⊥"


def dataset_table(dataset: Dataset) -> tuple[list[str], list[list]]:
    """Header ``x_0..x_{d-1}, y, piece_id`` and one row per sample."""
    d = dataset.inputs.shape[1]
    header = [f"x_{i}" for i in range(d)] + ["y", "piece_id"]
    rows = [
        [*map(float, x), float(y), int(p)]
        for x, y, p in zip(dataset.inputs, dataset.outputs, dataset.piece_ids)
    ]
    return header, rows


def default_partition(fn: TargetFunction) -> list[Box]:
    """The domain split along ``x_0`` at the generator's breakpoints."""
    cuts = [DOMAIN_LOW, *fn.breakpoints.tolist(), DOMAIN_HIGH]
    boxes = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        low = np.full(fn.dim, DOMAIN_LOW)
        high = np.full(fn.dim, DOMAIN_HIGH)
        low[0], high[0] = lo, hi
        boxes.append(Box(low=low, high=high))
    return boxes


def _check_partition(partition: Sequence[Box], dim: int) -> None:
    if not partition:
        raise PreconditionError("partition must contain at least one box")
    for box in partition:
        if box.low.shape != (dim,):
            raise DimensionMismatchError(
                "partition box width differs from the function"
            )
        if np.any(box.low < DOMAIN_LOW) or np.any(box.high > DOMAIN_HIGH):
            raise PreconditionError("partition box leaves the sampling domain")
    covered = math.fsum(box.volume for box in partition)
    domain = (DOMAIN_HIGH - DOMAIN_LOW) ** dim
    if abs(covered - domain) > 1e-9 * domain:
        raise PreconditionError(
            f"partition covers volume {covered}, the domain has {domain}"
        )


def fd_hessian_norms(f: TargetFunction, X: np.ndarray, h: float) -> np.ndarray:
    """Frobenius norm of the central-difference Hessian at each row of ``X``."""
    n, d = X.shape
    H = np.empty((n, d, d))
    eye = np.eye(d) * h
    for i in range(d):
        for j in range(i, d):
            ei, ej = eye[i], eye[j]
            H[:, i, j] = (
                f(X + ei + ej) - f(X + ei - ej) - f(X - ei + ej) + f(X - ei - ej)
            ) / (4.0 * h * h)
            H[:, j, i] = H[:, i, j]
    return np.sqrt(np.einsum("nij,nij->n", H, H))


def _shared_face(a: Box, b: Box) -> tuple[int, float, np.ndarray, np.ndarray] | None:
    for axis in range(a.low.shape[0]):
        if a.high[axis] != b.low[axis]:
            continue
        others = [k for k in range(a.low.shape[0]) if k != axis]
        lo = np.maximum(a.low[others], b.low[others])
        hi = np.minimum(a.high[others], b.high[others])
        if np.all(hi > lo) or not others:
            return axis, float(a.high[axis]), lo, hi
    return None


def nonlinear_complexity(
    f: TargetFunction,
    partition: Sequence[Box] | None = None,
    fd_step: float = DEFAULT_FD_STEP,
    points_per_piece: int = 64,
    seed: int = 0,
) -> ComplexityReport:
    """Per-piece mean Hessian norm plus the jump across each shared face.

    Curvature points stay ``2 * fd_step`` inside their box so stencils never
    straddle a boundary. Jumps are two-sided limits taken ``1e-7`` either side
    of the face, averaged over seeded face points.
    """
    if fd_step <= 0.0:
        raise PreconditionError("fd_step must be positive")
    if fd_step < FD_CANCELLATION_FLOOR:
        logger.warning(
            "fd_step %.1e is below %.0e; second differences will suffer cancellation",
            fd_step,
            FD_CANCELLATION_FLOOR,
        )
    partition = default_partition(f) if partition is None else list(partition)
    _check_partition(partition, f.dim)
    rng = np.random.default_rng(seed)

    curvature = []
    for box in partition:
        low, high = box.low + 2 * fd_step, box.high - 2 * fd_step
        if np.any(high <= low):
            raise PreconditionError(
                "partition box is too thin for the finite-difference step"
            )
        X = rng.uniform(low, high, size=(points_per_piece, f.dim))
        curvature.append(float(np.mean(fd_hessian_norms(f, X, fd_step))))

    jumps = []
    for a in partition:
        for b in partition:
            face = _shared_face(a, b)
            if face is None:
                continue
            axis, at, lo, hi = face
            X = np.empty((points_per_piece, f.dim))
            others = [k for k in range(f.dim) if k != axis]
            if others:
                X[:, others] = rng.uniform(lo, hi, size=(points_per_piece, len(others)))
            X[:, axis] = at + JUMP_OFFSET
            upper = f(X)
            X[:, axis] = at - JUMP_OFFSET
            jumps.append(float(np.mean(np.abs(upper - f(X)))))

    return ComplexityReport(
        curvature_terms=curvature,
        boundary_terms=jumps,
        c_nonlinear=math.fsum(curvature + jumps),
    )


def tag_dataset(
    dataset: Dataset, fn: TargetFunction, fd_step: float = DEFAULT_FD_STEP
) -> list[dict[DataAxis, float]]:
    """Default axis tags: spread, position in the stream, scale, piece and curvature."""
    n = len(dataset)
    inner = np.clip(
        dataset.inputs, DOMAIN_LOW + 2 * fd_step, DOMAIN_HIGH - 2 * fd_step
    )
    curvature = fd_hessian_norms(fn, inner, fd_step) if n else np.empty(0)
    return [
        {
            DataAxis.SPACE: float(np.max(np.abs(dataset.inputs[i]))),
            DataAxis.TIME: i / (n - 1) if n > 1 else 0.0,
            DataAxis.SCALE: float(abs(dataset.outputs[i])),
            DataAxis.MODALITY: float(dataset.piece_ids[i]),
            DataAxis.CURVATURE: float(curvature[i]),
        }
        for i in range(n)
    ]


def data_complexity_batch(
    tags: Sequence[Mapping[DataAxis, float]], scorer: AxisScorer
) -> float:
    """``sum_b S_data(b)`` over a batch of tagged samples; 0 for an empty batch."""
    scores = []
    for index, tag in enumerate(tags):
        missing = set(scorer.weights) - set(tag)
        if missing:
            names = ", ".join(sorted(axis.value for axis in missing))
            raise PreconditionError(f"sample {index} lacks scorer axes: {names}")
        scores.append(
            scorer.offset
            + math.fsum(w * tag[axis] for axis, w in scorer.weights.items())
        )
    return math.fsum(scores)


def data_complexity_full(
    dataset: Dataset,
    fn: TargetFunction,
    scorer: AxisScorer,
    fd_step: float = DEFAULT_FD_STEP,
) -> float:
    return data_complexity_batch(tag_dataset(dataset, fn, fd_step), scorer)


def minibatch_indices(n: int, b: int, seed: int, epoch: int = 0) -> list[np.ndarray]:
    """Disjoint index batches covering ``range(n)`` for one seeded epoch."""
    if not 1 <= b <= n:
        raise PreconditionError(f"batch size {b} must lie in [1, {n}]")
    order = np.random.default_rng([seed, epoch]).permutation(n)
    return [order[i : i + b] for i in range(0, n, b)]


def minibatch_sampler(
    dataset: Dataset, b: int, seed: int, epochs: int = 1
) -> Iterator[Dataset]:
    """Yield shuffled minibatches, epoch after epoch; the last one may be short."""
    n = len(dataset)
    if not 1 <= b <= n:
        raise PreconditionError(f"batch size {b} must lie in [1, {n}]")
    for epoch in range(epochs):
        for index in minibatch_indices(n, b, seed, epoch):
            yield dataset.subset(index)
