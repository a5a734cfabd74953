"""Node cover regions and how they move during training."""

import hashlib
import logging

import numpy as np

from src.enums import Activation
from src.errors import DimensionMismatchError, PreconditionError
from src.losses import LossSpec
from src.models import Batch, CoverDriftReport, CoverMap, CoverRow, Network
from src.nncore import descend, propagate

logger = logging.getLogger(__name__)


def dataset_digest(dataset: np.ndarray) -> str:
    data = np.ascontiguousarray(dataset, dtype=float)
    return hashlib.sha256(repr(data.shape).encode() + data.tobytes()).hexdigest()


def _as_matrix(dataset) -> np.ndarray:
    raw = dataset.inputs if isinstance(dataset, Batch) else dataset
    X = np.asarray(raw, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise PreconditionError("cover maps need a nonempty dataset")
    return X


# default thresholds; tanh nodes are covered by magnitude
COVER_THRESHOLDS = {
    Activation.RELU: 0.0,
    Activation.TANH: 0.5,
    Activation.IDENTITY: 0.0,
    Activation.SOFTMAX: 0.5,
}


def covered(h: np.ndarray, activation: Activation, tau: float | None) -> np.ndarray:
    """Boolean mask of nodes whose output activates above the threshold.

    ``tau=None`` takes the activation's default from ``COVER_THRESHOLDS``.
    """
    threshold = COVER_THRESHOLDS[activation] if tau is None else tau
    if activation == Activation.TANH:
        return np.abs(h) > threshold
    return h > threshold


def cover_map(
    net: Network, dataset, tau: float | None = None, iteration: int = 0
) -> CoverMap:
    """``U[k][n] = {i : h_{k+1}(x_i)[n] covered}`` for every layer and node."""
    X = _as_matrix(dataset)
    states, _ = propagate(net, X)
    entries = []
    for layer, h in zip(net.layers, states[1:]):
        active = covered(h, layer.activation, tau)
        entries.append(
            [
                frozenset(np.flatnonzero(active[:, n]).tolist())
                for n in range(h.shape[1])
            ]
        )
    return CoverMap(
        iteration=iteration,
        tau=tau,
        n_samples=X.shape[0],
        layer_sizes=[layer.out_dim for layer in net.layers],
        dataset_digest=dataset_digest(X),
        entries=entries,
    )


def active_covers(net: Network, x, tau: float | None = None) -> set[tuple[int, int]]:
    """``C(x) = {(k, n) : node n of layer k is covered at x}``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatchError(f"expected one sample, got shape {x.shape}")
    states, _ = propagate(net, x[None, :])
    return {
        (k, int(n))
        for k, (layer, h) in enumerate(zip(net.layers, states[1:]))
        for n in np.flatnonzero(covered(h[0], layer.activation, tau))
    }


def coverage_fraction(cm: CoverMap, layer: int) -> float:
    """Fraction of samples covered by at least one node of ``layer``."""
    if not 0 <= layer < len(cm.entries):
        raise PreconditionError(
            f"layer {layer} out of range for {len(cm.entries)} layers"
        )
    covered: set[int] = set()
    for cover in cm.entries[layer]:
        covered |= cover
    return len(covered) / cm.n_samples


def jaccard_distance(a: frozenset[int], b: frozenset[int]) -> float:
    union = len(a | b)
    if union == 0:
        return 0.0
    return 1.0 - len(a & b) / union


def cover_drift(before: CoverMap, after: CoverMap) -> CoverDriftReport:
    if not before.same_frame(after):
        raise PreconditionError(
            "cover maps differ in dataset, tau or architecture; drift is undefined"
        )
    distances = [
        [jaccard_distance(a, b) for a, b in zip(layer_a, layer_b)]
        for layer_a, layer_b in zip(before.entries, after.entries)
    ]
    layers = range(len(before.entries))
    return CoverDriftReport(
        distances=distances,
        mean_drift=[float(np.mean(d)) for d in distances],
        coverage_before=[coverage_fraction(before, k) for k in layers],
        coverage_after=[coverage_fraction(after, k) for k in layers],
    )


def activation_pattern(net: Network, x, layer: int) -> tuple[bool, ...]:
    """Sign pattern of the pre-activation at ``layer``; names the linear piece."""
    x = np.asarray(x, dtype=float)
    _, pres = propagate(net, x[None, :])
    return tuple(bool(v) for v in pres[layer][0] > 0.0)


def count_pieces(net: Network, dataset, layer: int) -> int:
    """Number of distinct activation patterns the dataset visits at ``layer``."""
    X = _as_matrix(dataset)
    _, pres = propagate(net, X)
    patterns = pres[layer] > 0.0
    return len({row.tobytes() for row in patterns})


def track_covers(
    net: Network,
    loss: LossSpec,
    batch: Batch,
    steps: int,
    lr: float,
    tau: float | None,
    every: int,
) -> tuple[Network, list[CoverMap], list[CoverRow]]:
    """Train with gradient descent, snapshotting covers every ``every`` steps.

    Covers are measured on ``batch.inputs``. Rows carry each node's cover size
    and its Jaccard distance to the previous snapshot (blank for the first).
    """
    snapshots: list[CoverMap] = []

    def snapshot(step: int, current: Network) -> None:
        if step % every == 0 or step == steps:
            if snapshots and snapshots[-1].iteration == step:
                return
            snapshots.append(cover_map(current, batch.inputs, tau, iteration=step))

    trained, _ = descend(net, loss, batch, steps, lr, callback=snapshot)

    rows: list[CoverRow] = []
    previous: CoverMap | None = None
    for cm in snapshots:
        drift = cover_drift(previous, cm) if previous is not None else None
        for k, layer in enumerate(cm.entries):
            for n, cover in enumerate(layer):
                rows.append(
                    CoverRow(
                        iteration=cm.iteration,
                        layer=k,
                        node=n,
                        cover_size=len(cover),
                        jaccard_vs_prev=(
                            None if drift is None else drift.distances[k][n]
                        ),
                    )
                )
        previous = cm
    logger.info("tracked %d cover snapshots over %d steps", len(snapshots), steps)
    return trained, snapshots, rows
